"""Command line: figures <figure-id> <csv> <out.png>."""

from __future__ import annotations

import argparse
import sys

from .plotting import FIGURE_IDS, FigureSpec, plot_figure
from .reader import SchemaError


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render a scenario trajectory CSV as a PNG")
    parser.add_argument("figure_id", choices=FIGURE_IDS, metavar="figure-id")
    parser.add_argument("csv", help="trajectory CSV from the simulator CLI")
    parser.add_argument("out", help="output image path")
    args = parser.parse_args(argv)
    try:
        plot_figure(FigureSpec(args.figure_id, args.csv, args.out))
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
