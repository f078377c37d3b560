"""Render accuracy/p-value figures from hiernoise CSV exports.

This package deliberately knows nothing about the training code: it
consumes only the documented artifact schemas.

comparison.csv columns:
    epoch,flat_mean,flat_stderr,hc_mean,hc_stderr,p_median

per-run CSV columns (ablation input, one file per run, named
``alpha<a>_p<p>_seed<s>.csv``):
    epoch,train_loss,fine_loss,coarse_loss,test_acc
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

COMPARISON_COLUMNS = ("epoch", "flat_mean", "flat_stderr", "hc_mean",
                      "hc_stderr", "p_median")
RUN_COLUMNS = ("epoch", "train_loss", "fine_loss", "coarse_loss", "test_acc")

RUN_NAME = re.compile(r"^alpha(?P<alpha>[0-9.eE+-]+)_p(?P<p>[0-9.eE+-]+)"
                      r"_seed(?P<seed>-?\d+)\.csv$")


class SchemaError(ValueError):
    """Input CSV does not carry the documented columns."""


@dataclass
class FigureSpec:
    source: str | Path           # comparison.csv or a directory of run CSVs
    output: str | Path
    title: str = ""
    significance: float = 0.05


def read_table(path, required_columns) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file")
        missing = [c for c in required_columns if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    out = {}
    for col in required_columns:
        out[col] = np.array([float(row[col]) for row in rows])
    return out


def plot_comparison(spec: FigureSpec):
    """Two-panel figure: accuracy curves with stderr bands, p-value track.

    Returns the matplotlib Figure (also saved to ``spec.output``) so
    callers can inspect the rendered series.
    """
    table = read_table(spec.source, COMPARISON_COLUMNS)
    epochs = table["epoch"]

    fig, (ax_acc, ax_p) = plt.subplots(
        2, 1, figsize=(7, 6), sharex=True,
        gridspec_kw={"height_ratios": [2.2, 1.0]},
    )
    for method, color in (("flat", "tab:blue"), ("hc", "tab:red")):
        mean = table[f"{method}_mean"]
        stderr = table[f"{method}_stderr"]
        ax_acc.plot(epochs, mean, color=color, label=method.upper(),
                    linewidth=1.5)
        ax_acc.fill_between(epochs, mean - stderr, mean + stderr,
                            color=color, alpha=0.25, linewidth=0)
    ax_acc.set_ylabel("test accuracy")
    ax_acc.legend(loc="lower right")
    if spec.title:
        ax_acc.set_title(spec.title)

    ax_p.plot(epochs, table["p_median"], color="tab:green",
              label="median p", linewidth=1.2)
    ax_p.axhline(spec.significance, color="black", linestyle="--",
                 linewidth=0.9, label=f"p = {spec.significance:g}")
    ax_p.set_yscale("log")
    ax_p.set_xlabel("epoch")
    ax_p.set_ylabel("McNemar p")
    ax_p.legend(loc="upper right")

    fig.tight_layout()
    fig.savefig(spec.output, dpi=120)
    return fig


def collect_runs(run_dir) -> dict[tuple[float, float], list[dict[str, np.ndarray]]]:
    """Group run CSVs by (noise_ratio, alpha) using the filename convention."""
    run_dir = Path(run_dir)
    groups: dict[tuple[float, float], list[dict[str, np.ndarray]]] = {}
    for path in sorted(run_dir.glob("*.csv")):
        match = RUN_NAME.match(path.name)
        if not match:
            continue
        key = (float(match.group("p")), float(match.group("alpha")))
        groups.setdefault(key, []).append(read_table(path, RUN_COLUMNS))
    if not groups:
        raise SchemaError(
            f"{run_dir}: no files matching alpha<a>_p<p>_seed<s>.csv"
        )
    return groups


def plot_ablation(spec: FigureSpec):
    """One accuracy curve per alpha, one panel per noise ratio.

    Curves are seed-averaged with stderr bands.  Returns the Figure.
    """
    groups = collect_runs(spec.source)
    ratios = sorted({p for p, _ in groups})
    alphas = sorted({a for _, a in groups})
    cmap = plt.get_cmap("viridis")
    colors = {a: cmap(i / max(1, len(alphas) - 1))
              for i, a in enumerate(alphas)}

    fig, axes = plt.subplots(1, len(ratios), figsize=(4.2 * len(ratios), 3.6),
                             sharey=True, squeeze=False)
    for ax, ratio in zip(axes[0], ratios):
        for alpha in alphas:
            runs = groups.get((ratio, alpha))
            if not runs:
                continue
            accs = np.stack([run["test_acc"] for run in runs])
            epochs = runs[0]["epoch"]
            mean = accs.mean(axis=0)
            if accs.shape[0] > 1:
                stderr = accs.std(axis=0, ddof=1) / np.sqrt(accs.shape[0])
            else:
                stderr = np.zeros_like(mean)
            ax.plot(epochs, mean, color=colors[alpha],
                    label=f"alpha={alpha:g}", linewidth=1.4)
            ax.fill_between(epochs, mean - stderr, mean + stderr,
                            color=colors[alpha], alpha=0.2, linewidth=0)
        ax.set_title(f"noise ratio {ratio:g}")
        ax.set_xlabel("epoch")
    axes[0][0].set_ylabel("test accuracy")
    handles, labels = axes[0][0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="lower center", ncol=len(alphas),
               frameon=False)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout(rect=(0, 0.08, 1, 1))
    fig.savefig(spec.output, dpi=120)
    return fig
