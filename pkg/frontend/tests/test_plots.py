"""Smoke, schema, and round-trip tests for the figure renderers.

Round-trip means: the data baked into the rendered matplotlib artists is
re-read and compared against the CSV contents.
"""

import numpy as np
import pytest
from click.testing import CliRunner

from hiernoise_plots import (FigureSpec, SchemaError, plot_ablation,
                             plot_comparison, read_table)
from hiernoise_plots.cli import main


def write_comparison_csv(path, epochs=12, hc_above=True, zero_stderr=False):
    rows = ["epoch,flat_mean,flat_stderr,hc_mean,hc_stderr,p_median"]
    flat, hc, ps = [], [], []
    for e in range(1, epochs + 1):
        f = 0.5 + 0.01 * e
        h = f + (0.03 if hc_above else -0.03)
        p = 0.01 if e % 2 == 0 else 0.2
        stderr = 0.0 if zero_stderr else 0.005
        rows.append(f"{e},{f!r},{stderr!r},{h!r},{stderr!r},{p!r}")
        flat.append(f)
        hc.append(h)
        ps.append(p)
    path.write_text("\n".join(rows) + "\n")
    return np.array(flat), np.array(hc), np.array(ps)


def write_run_csv(path, accs):
    rows = ["epoch,train_loss,fine_loss,coarse_loss,test_acc"]
    for e, acc in enumerate(accs, start=1):
        rows.append(f"{e},1.0,1.0,0.5,{acc!r}")
    path.write_text("\n".join(rows) + "\n")


class TestPlotComparison:
    def test_smoke_nonzero_png(self, tmp_path):
        csv = tmp_path / "comparison.csv"
        write_comparison_csv(csv)
        out = tmp_path / "fig.png"
        plot_comparison(FigureSpec(source=csv, output=out, title="t"))
        assert out.exists() and out.stat().st_size > 1000

    def test_round_trip_series(self, tmp_path):
        csv = tmp_path / "comparison.csv"
        flat, hc, ps = write_comparison_csv(csv, hc_above=True)
        fig = plot_comparison(FigureSpec(source=csv, output=tmp_path / "f.png"))
        ax_acc, ax_p = fig.axes
        lines = {line.get_label(): line.get_ydata() for line in ax_acc.lines}
        assert np.array_equal(lines["FLAT"], flat)
        assert np.array_equal(lines["HC"], hc)
        assert np.all(lines["HC"] > lines["FLAT"])
        p_line = ax_p.lines[0].get_ydata()
        assert np.array_equal(p_line, ps)

    def test_zero_stderr_band_collapses(self, tmp_path):
        csv = tmp_path / "comparison.csv"
        flat, _, _ = write_comparison_csv(csv, zero_stderr=True)
        fig = plot_comparison(FigureSpec(source=csv, output=tmp_path / "f.png"))
        ax_acc = fig.axes[0]
        band = ax_acc.collections[0].get_paths()[0].vertices[:, 1]
        assert band.min() >= flat.min() - 1e-12
        assert band.max() <= flat.max() + 1e-12

    def test_missing_columns(self, tmp_path):
        csv = tmp_path / "bad.csv"
        csv.write_text("epoch,flat_mean\n1,0.5\n")
        with pytest.raises(SchemaError, match="missing columns"):
            plot_comparison(FigureSpec(source=csv, output=tmp_path / "f.png"))

    def test_empty_file(self, tmp_path):
        csv = tmp_path / "empty.csv"
        csv.write_text("")
        with pytest.raises(SchemaError):
            plot_comparison(FigureSpec(source=csv, output=tmp_path / "f.png"))

    def test_header_only(self, tmp_path):
        csv = tmp_path / "header.csv"
        csv.write_text("epoch,flat_mean,flat_stderr,hc_mean,hc_stderr,p_median\n")
        with pytest.raises(SchemaError, match="no data rows"):
            plot_comparison(FigureSpec(source=csv, output=tmp_path / "f.png"))


class TestPlotAblation:
    def make_run_dir(self, tmp_path, ratios=(0.0, 0.5), alphas=(0.25, 1.0),
                     seeds=(1, 2)):
        run_dir = tmp_path / "runs"
        run_dir.mkdir()
        truth = {}
        for p in ratios:
            for a in alphas:
                per_seed = []
                for s in seeds:
                    accs = [0.4 + 0.02 * e + 0.05 * a + 0.001 * s
                            for e in range(10)]
                    write_run_csv(run_dir / f"alpha{a:g}_p{p:g}_seed{s}.csv", accs)
                    per_seed.append(accs)
                truth[(p, a)] = np.mean(per_seed, axis=0)
        return run_dir, truth

    def test_smoke(self, tmp_path):
        run_dir, _ = self.make_run_dir(tmp_path)
        out = tmp_path / "fig.png"
        plot_ablation(FigureSpec(source=run_dir, output=out))
        assert out.exists() and out.stat().st_size > 1000

    def test_round_trip_means(self, tmp_path):
        run_dir, truth = self.make_run_dir(tmp_path)
        fig = plot_ablation(FigureSpec(source=run_dir, output=tmp_path / "f.png"))
        # panels follow sorted noise ratios; curves follow sorted alphas
        for ax, ratio in zip(fig.axes, (0.0, 0.5)):
            for line, alpha in zip(ax.lines, (0.25, 1.0)):
                assert line.get_label() == f"alpha={alpha:g}"
                assert np.allclose(line.get_ydata(), truth[(ratio, alpha)],
                                   atol=1e-12)

    def test_no_matching_files(self, tmp_path):
        empty = tmp_path / "runs"
        empty.mkdir()
        (empty / "unrelated.csv").write_text("a,b\n1,2\n")
        with pytest.raises(SchemaError, match="no files matching"):
            plot_ablation(FigureSpec(source=empty, output=tmp_path / "f.png"))


class TestCli:
    def test_compare_command(self, tmp_path):
        csv = tmp_path / "comparison.csv"
        write_comparison_csv(csv)
        out = tmp_path / "fig.png"
        result = CliRunner().invoke(main, ["compare", str(csv), "-o", str(out)])
        assert result.exit_code == 0, result.output
        assert out.exists()

    def test_ablate_command(self, tmp_path):
        run_dir = TestPlotAblation().make_run_dir(tmp_path)[0]
        out = tmp_path / "fig.png"
        result = CliRunner().invoke(main, ["ablate", str(run_dir), "-o", str(out)])
        assert result.exit_code == 0, result.output
        assert out.exists()

    def test_bad_schema_exits_nonzero(self, tmp_path):
        csv = tmp_path / "bad.csv"
        csv.write_text("epoch\n1\n")
        result = CliRunner().invoke(main, ["compare", str(csv), "-o",
                                           str(tmp_path / "f.png")])
        assert result.exit_code != 0
