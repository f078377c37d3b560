from .plotting import (FigureSpec, SchemaError, collect_runs, plot_ablation,
                       plot_comparison, read_table)

__version__ = "0.1.0"

__all__ = ["FigureSpec", "SchemaError", "collect_runs", "plot_ablation",
           "plot_comparison", "read_table"]
