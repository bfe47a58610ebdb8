"""Batch renderer for ring-condensate trajectory CSV files."""

from .reader import SchemaError, TrajectoryTable, read_table
from .plotting import (FIGURE_IDS, FigureSpec, distinct_trace_count,
                       plot_figure)

__version__ = "0.1.0"

__all__ = [
    "FIGURE_IDS",
    "FigureSpec",
    "SchemaError",
    "TrajectoryTable",
    "distinct_trace_count",
    "plot_figure",
    "read_table",
    "__version__",
]
