"""Figure rendering CLI.

    plot-hiernoise compare out/exp/comparison.csv -o fig.png
    plot-hiernoise ablate out/exp/runs -o fig.png
"""

from __future__ import annotations

import click

from .plotting import FigureSpec, SchemaError, plot_ablation, plot_comparison


@click.group()
def main():
    """Render figures from hiernoise CSV artifacts."""


@main.command()
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("--title", default="", help="Figure title.")
@click.option("--significance", default=0.05, show_default=True,
              help="Reference line for the p-value panel.")
def compare(csv_path, output, title, significance):
    """Accuracy curves with stderr bands plus the median p-value track."""
    spec = FigureSpec(source=csv_path, output=output, title=title,
                      significance=significance)
    try:
        plot_comparison(spec)
    except SchemaError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {output}")


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("--title", default="", help="Figure title.")
def ablate(run_dir, output, title):
    """Per-alpha accuracy curves, one panel per noise ratio."""
    spec = FigureSpec(source=run_dir, output=output, title=title)
    try:
        plot_ablation(spec)
    except SchemaError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {output}")
