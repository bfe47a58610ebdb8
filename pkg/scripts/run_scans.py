#!/usr/bin/env python3
"""Threshold and resonance scans: analytic vs simulated, tabulated.

Usage: python scripts/run_scans.py [--lam 100] [--horizon 20]
"""

import argparse

from ringbec import (critical_imbalance_analytic, critical_imbalance_simulated,
                     linearized_resonance_measured, make_params,
                     resonance_frequency)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--lam", type=float, default=100.0)
    ap.add_argument("--n-total", type=float, default=1e5)
    ap.add_argument("--horizon", type=float, default=20.0)
    args = ap.parse_args()

    n_upper, n_lower = critical_imbalance_analytic(args.lam, args.n_total)
    print(f"analytic thresholds (Lambda={args.lam:g}): "
          f"upper {n_upper:.1f}, lower {n_lower:.1f}")

    n_conf, n_depl, report = critical_imbalance_simulated(
        args.lam, args.n_total, horizon=args.horizon)
    print(f"simulated thresholds: confined {n_conf}, depleted {n_depl}")
    print(f"  brackets: {report.measured['bracket_confined']}, "
          f"{report.measured['bracket_depleted']}")

    print("linear-regime oscillation frequency, measured vs closed formula:")
    for lam in (0.0, 100.0, 500.0):
        params = make_params(lam=lam, n_total=args.n_total)
        measured = linearized_resonance_measured(params)
        formula = resonance_frequency(params)
        print(f"  Lambda={lam:5g}: measured {measured:8.4f}  "
              f"formula {formula:8.4f}  ratio {measured / formula:.4f}")


if __name__ == "__main__":
    main()
