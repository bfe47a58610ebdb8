"""Command-line interface.

Subcommands: simulate, scan-threshold, resonance, conveyor (each taking a
config file), and validate (built-in invariant battery).  Exit codes:
0 success, 1 validation/runtime failure, 2 config error.  Errors go to
stderr with an `error:` prefix.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .config import (RunConfig, build_initial, build_options, build_params,
                     build_schedule, config_hash, parse_config)
from .drives import (constant_schedule, cut_link, resonance_frequency,
                     resonant_modulation)
from .errors import ConfigError, RingBecError, RootNotFoundError
from .integrator import IntegratorOptions, integrate, populations_at
from .model import from_polar, make_params, rhs_complex, rhs_polar
from .scenarios import (ScanReport, critical_imbalance_analytic,
                        critical_imbalance_simulated,
                        linearized_resonance_measured)
from .states import seeded_state, winding_state
from .trajectory_io import write_report, write_trajectory
from .version import __version__


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _out_paths(args, config: RunConfig, config_path: str):
    stem = os.path.splitext(os.path.basename(config_path))[0]
    fmt = args.format or config.output["format"]
    ext = "csv" if fmt == "csv" else "jsonl"
    traj_name = config.output["path"] or f"{stem}.{ext}"
    report_name = config.output["report_path"] or f"{stem}.report.json"
    os.makedirs(args.out_dir, exist_ok=True)
    return (os.path.join(args.out_dir, traj_name),
            os.path.join(args.out_dir, report_name), fmt)


def _load(config_path: str) -> RunConfig:
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from None
    return parse_config(text)


def _cmd_simulate(args) -> int:
    config = _load(args.config)
    params = build_params(config)
    psi0 = build_initial(config, params)
    schedule = build_schedule(config, params)
    options = build_options(config)
    traj = integrate(psi0, params, schedule, options)
    traj_path, report_path, fmt = _out_paths(args, config, args.config)
    write_trajectory(traj, traj_path, fmt, config)
    report = ScanReport(
        scenario="simulate",
        inputs={"config_sha256": config_hash(config)},
        measured={"n_samples": traj.n_samples,
                  "norm_drift": traj.norm_drift,
                  "final_populations": traj.populations[-1].tolist(),
                  "final_winding": float(traj.winding[-1])},
        labels={"norm": "ok" if traj.norm_ok() else "drifted"},
        criteria={"norm_drift": "max |sum N_i - N_T|; run fails validation "
                                "above 1e-7 N_T"})
    write_report(report, report_path)
    if not args.quiet:
        print(f"wrote {traj_path}")
        print(f"wrote {report_path}")
    if not traj.norm_ok():
        _fail(f"norm drift {traj.norm_drift:.3g} exceeds 1e-7 N_T")
        return 1
    return 0


def _cmd_scan_threshold(args) -> int:
    config = _load(args.config)
    params = build_params(config)
    horizon = float(config.integrator["max_time"])
    try:
        n_upper, n_lower = critical_imbalance_analytic(params.lam,
                                                       params.n_total)
    except RootNotFoundError:
        n_upper = n_lower = math.nan
    n_conf, n_depl, sim_report = critical_imbalance_simulated(
        params.lam, params.n_total, horizon=horizon,
        k_tilde=params.k_tilde)
    residual_conf = (n_conf - n_upper) if n_conf is not None else math.nan
    residual_depl = (n_depl - n_lower) if n_depl is not None else math.nan
    report = ScanReport(
        scenario="scan-threshold",
        inputs={"config_sha256": config_hash(config), "lam": params.lam,
                "n_total": params.n_total, "horizon": horizon},
        measured={"n_upper_analytic": n_upper, "n_lower_analytic": n_lower,
                  "n_confined_simulated": n_conf,
                  "n_depleted_simulated": n_depl,
                  "residual_confined": residual_conf,
                  "residual_depleted": residual_depl,
                  "brackets": {
                      "confined": sim_report.measured["bracket_confined"],
                      "depleted": sim_report.measured["bracket_depleted"]}},
        labels=sim_report.labels, criteria=sim_report.criteria)
    _, report_path, _ = _out_paths(args, config, args.config)
    write_report(report, report_path)
    if not args.quiet:
        print(f"analytic: upper {n_upper:.6g}, lower {n_lower:.6g}")
        print(f"simulated: confined {n_conf}, depleted {n_depl}")
        print(f"wrote {report_path}")
    return 0


def _cmd_resonance(args) -> int:
    config = _load(args.config)
    params = build_params(config)
    measured = linearized_resonance_measured(
        params, max_time=float(config.integrator["max_time"]),
        sample_interval=float(config.output["sample_interval"]))
    formula = resonance_frequency(params)
    report = ScanReport(
        scenario="resonance",
        inputs={"config_sha256": config_hash(config), "lam": params.lam,
                "n_total": params.n_total},
        measured={"measured_frequency": measured,
                  "formula_frequency": formula,
                  "ratio": measured / formula},
        criteria={"measured_frequency": "FFT peak of N_1(t) from a "
                                        "1e-4 N_T seed, undriven"})
    _, report_path, _ = _out_paths(args, config, args.config)
    write_report(report, report_path)
    if not args.quiet:
        print(f"measured {measured:.6g} omega_R, formula {formula:.6g} "
              f"omega_R")
        print(f"wrote {report_path}")
    return 0


def _cmd_conveyor(args) -> int:
    config = _load(args.config)
    if config.schedule["kind"] != "conveyor":
        raise ConfigError("conveyor command needs schedule.kind = 'conveyor'")
    params = build_params(config)
    psi0 = build_initial(config, params)
    schedule = build_schedule(config, params)
    options = build_options(config)
    traj = integrate(psi0, params, schedule, options)
    durations = traj.segment_durations or tuple(traj.schedule.durations)
    n = params.n_wells
    direction = int(config.schedule["direction"])
    start_link = traj.schedule.start_link
    well0 = start_link if direction == 1 else (start_link + 1) % n
    edges = np.cumsum(durations)
    t = traj.times
    reached = [float(e) for e in edges if e <= t[-1]]
    pops_at = populations_at(traj, reached) if reached else []
    fidelities = []
    for k, edge in enumerate(reached):
        dest = (well0 + direction * (k + 1)) % n
        fidelities.append(float(pops_at[k][dest] / params.n_total))
    occ = (well0 + direction * len(fidelities)) % n
    after = t >= edges[min(len(fidelities), len(edges)) - 1]
    series = traj.populations[after, occ]
    post_dev = float(np.max(np.abs(series - series[0])) / series[0]) \
        if len(series) else math.nan
    traj_path, report_path, fmt = _out_paths(args, config, args.config)
    write_trajectory(traj, traj_path, fmt, config)
    report = ScanReport(
        scenario="conveyor",
        inputs={"config_sha256": config_hash(config), "lam": params.lam,
                "n_total": params.n_total,
                "k_low": config.schedule["k_low"],
                "k_high": config.schedule["k_high"]},
        measured={"durations": tuple(float(d) for d in durations),
                  "fidelities": tuple(fidelities),
                  "min_fidelity": min(fidelities) if fidelities else math.nan,
                  "turns": len(fidelities) // n,
                  "post_stop_max_dev_frac": post_dev},
        criteria={"fidelities": "destination well population / N_T at each "
                                "segment end",
                  "post_stop_max_dev_frac": "max |N_occ - N_occ(t_end)| / "
                                            "N_occ(t_end) after the last "
                                            "transfer"})
    write_report(report, report_path)
    if not args.quiet:
        print(f"transfers {len(fidelities)}, min fidelity "
              f"{report.measured['min_fidelity']:.4f}")
        print(f"wrote {traj_path}")
        print(f"wrote {report_path}")
    return 0


def _check_number_conservation():
    params = make_params(lam=100.0)
    schedule = cut_link(constant_schedule(0.5), 0, 0.5)
    traj = integrate(winding_state(params, 1), params, schedule,
                     IntegratorOptions(max_time=3.0, sample_interval=0.01))
    ok = traj.norm_ok()
    return ok, f"norm drift {traj.norm_drift:.3g} atoms (budget 1e-7 N_T)"


def _check_energy_conservation():
    params = make_params(lam=100.0)
    traj = integrate(seeded_state(params, 100.0), params,
                     constant_schedule(0.5),
                     IntegratorOptions(max_time=10.0, sample_interval=0.01))
    drift = float(np.max(np.abs(traj.energy - traj.energy[0]))
                  / abs(traj.energy[0]))
    return drift <= 1e-8, f"relative energy drift {drift:.3g} (budget 1e-8)"


def _check_polar_complex():
    params = make_params(lam=100.0)
    pops = params.n_total * np.array([0.4, 0.3, 0.2, 0.1])
    phases = np.array([0.0, 0.7, -1.1, 2.2])
    psi = from_polar(pops, phases)
    k = np.full(4, 0.5)
    dpsi = rhs_complex(psi, params, k)
    dn, dth = rhs_polar(pops, phases, params, k)
    sqrt_n = np.sqrt(pops)
    dpsi_polar = (dn / (2.0 * sqrt_n) + 1j * sqrt_n * dth) * np.exp(1j * phases)
    err = float(np.max(np.abs(dpsi - dpsi_polar)) / np.max(np.abs(dpsi)))
    return err <= 1e-10, f"relative mismatch {err:.3g} (budget 1e-10)"


def _check_time_reversal():
    params = make_params(lam=100.0)
    psi0 = seeded_state(params, 1000.0)
    opts = IntegratorOptions(max_time=1.0, sample_interval=0.5)
    fwd = integrate(psi0, params, constant_schedule(0.5), opts)
    back = integrate(np.conj(fwd.states[-1]), params, constant_schedule(0.5),
                     opts)
    err = float(np.max(np.abs(np.conj(back.states[-1]) - psi0))
                / math.sqrt(params.n_total))
    return err <= 1e-7, f"normalized return error {err:.3g} (budget 1e-7)"


def _check_winding_conservation():
    params = make_params(lam=100.0)
    traj = integrate(winding_state(params, 1), params, constant_schedule(0.5),
                     IntegratorOptions(max_time=5.0, sample_interval=0.05))
    ok = bool(np.all(traj.winding == 1.0))
    return ok, "winding stayed 1 on the perfect ring"


def _check_schedule_nonnegative():
    params = make_params(lam=100.0)
    schedule = resonant_modulation(params, depth=1.0, phi=0.3)
    ts = np.linspace(0.0, 5.0, 1001)
    low = min(float(np.min(schedule.vector(t))) for t in ts)
    return low >= 0.0, f"min coupling {low:.3g} over the drive period"


def _check_threshold_symmetry():
    n_upper, n_lower = critical_imbalance_analytic(100.0, 1e5)
    err = abs((n_upper - 25000.0) - (25000.0 - n_lower))
    return err <= 1e-6, f"|upper - N_T/4| vs |N_T/4 - lower| differ by {err:.3g}"


def _check_gauge_invariance():
    params = make_params(lam=100.0)
    psi = from_polar(params.n_total * np.array([0.3, 0.3, 0.25, 0.15]),
                     np.array([0.1, 1.2, -0.4, 2.0]))
    k = np.full(4, 0.5)
    alpha = 0.83
    lhs = rhs_complex(psi * np.exp(1j * alpha), params, k)
    rhs = rhs_complex(psi, params, k) * np.exp(1j * alpha)
    err = float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))
    return err <= 1e-12, f"relative gauge error {err:.3g}"


_CHECKS = (
    ("number-conservation", _check_number_conservation),
    ("energy-conservation", _check_energy_conservation),
    ("polar-complex-equivalence", _check_polar_complex),
    ("time-reversal", _check_time_reversal),
    ("winding-conservation", _check_winding_conservation),
    ("schedule-nonnegativity", _check_schedule_nonnegative),
    ("threshold-symmetry", _check_threshold_symmetry),
    ("gauge-invariance", _check_gauge_invariance),
)


def _cmd_validate(args) -> int:
    failures = 0
    for name, check in _CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        if ok:
            if not args.quiet:
                print(f"PASS {name}: {detail}")
        else:
            failures += 1
            print(f"FAIL {name}: {detail}")
    if failures:
        _fail(f"{failures} invariant check(s) failed")
        return 1
    if not args.quiet:
        print(f"all {len(_CHECKS)} invariant checks passed")
    return 0


def cli_main(argv=None) -> int:
    parser = _Parser(prog="ringbec",
                     description="Ring condensate tunnelling simulator")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("--out-dir", default=".",
                        help="directory for trajectory and report files")
    parser.add_argument("--format", choices=["csv", "jsonl"], default=None,
                        help="override the config output format")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress informational output")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", _cmd_simulate),
                     ("scan-threshold", _cmd_scan_threshold),
                     ("resonance", _cmd_resonance),
                     ("conveyor", _cmd_conveyor)):
        sp = sub.add_parser(name)
        sp.add_argument("config")
        sp.set_defaults(handler=fn)
    sp = sub.add_parser("validate")
    sp.set_defaults(handler=_cmd_validate)
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        _fail(str(exc))
        return 2
    except RingBecError as exc:
        _fail(str(exc))
        return 1


def main() -> None:
    sys.exit(cli_main())
