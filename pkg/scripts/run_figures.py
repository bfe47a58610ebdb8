#!/usr/bin/env python3
"""Run every bundled figure config and collect trajectories under results/.

Usage: python scripts/run_figures.py [--out-dir results] [--format csv]
"""

import argparse
import pathlib
import sys

from ringbec.cli import cli_main

CONFIGS = ("fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b", "fig5")


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--format", choices=["csv", "jsonl"], default=None)
    args = ap.parse_args()

    root = pathlib.Path(__file__).resolve().parent.parent
    rc_total = 0
    for name in CONFIGS:
        config = root / "configs" / f"{name}.toml"
        command = "conveyor" if name == "fig5" else "simulate"
        argv = ["--out-dir", args.out_dir]
        if args.format:
            argv += ["--format", args.format]
        argv += [command, str(config)]
        print(f"== {name} ({command})")
        rc = cli_main(argv)
        rc_total = max(rc_total, rc)
    return rc_total


if __name__ == "__main__":
    sys.exit(main())
