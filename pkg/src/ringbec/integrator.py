"""Trajectory integration of the ring equations under coupling schedules.

Internally the state is stepped in normalized amplitudes y = psi / sqrt(N_T)
on the 1/omega_R clock, so the adaptive tolerances are in normalized units
and all recorded times are in 1/omega_R.  Schedule discontinuities and
sample times are forced step boundaries; stages that land exactly on a
segment end evaluate the coupling on the left side of any jump there, so
each segment integrates a smooth problem.

Feedback conveyor schedules are resolved in a first event-detection pass
(per-transfer durations found by arming on the directed active-link
current and bisecting its first downward zero crossing), then the
trajectory is produced by a second pass over the equivalent open-loop
schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from .drives import CouplingSchedule
from .errors import (DimensionError, DivergenceError, ParameterError,
                     StalledTransferError, StiffnessError,
                     WindingUndefinedError)
from .model import (ModelParams, check_state, energy, total_atoms,
                    winding_number)
from .version import __version__

# Dormand-Prince 5(4) tableau, FSAL form: the 5th-order weights are the
# last stage row and the embedded error weights are b5 - b4.
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
         22 / 525, -1 / 40)

_MAX_REJECTS = 200
_SAFETY = 0.9
_SHRINK = 0.2
_GROW = 5.0


@dataclass(frozen=True)
class IntegratorOptions:
    """Stepper selection, tolerances, and recording grid.

    Times (max_time, sample_interval, dt) are in 1/omega_R units.  The
    adaptive tolerances apply to normalized amplitudes y = psi/sqrt(N_T).
    """

    method: str = "dopri45"
    max_time: float = 10.0
    sample_interval: float = 0.01
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    dt: float = 1e-3

    def __post_init__(self):
        if self.method not in ("dopri45", "rk4"):
            raise ParameterError(
                f"method must be 'dopri45' or 'rk4', got {self.method!r}")
        if not (self.max_time > 0):
            raise ParameterError(f"max_time must be positive, got {self.max_time}")
        if not (0 < self.sample_interval <= self.max_time):
            raise ParameterError(
                f"sample_interval must lie in (0, max_time], got "
                f"{self.sample_interval}")
        if self.method == "rk4":
            if not (self.dt > 0):
                raise ParameterError(f"dt must be positive, got {self.dt}")
        else:
            for name, tol in (("abs_tol", self.abs_tol), ("rel_tol", self.rel_tol)):
                if not (0 < tol < 1e-2):
                    raise ParameterError(
                        f"{name} must lie in (0, 1e-2), got {tol}")


@dataclass(frozen=True)
class Trajectory:
    """Recorded samples plus the metadata needed to re-run them bit-identically.

    times are in 1/omega_R units; currents are atoms per 1/omega_R
    (J_i = K_i Im(psi_i* psi_{i+1}) / omega_R); phases are unwrapped along
    the time axis per well; energy is in raw hbar = 1 units.
    """

    times: NDArray[np.float64]
    states: NDArray[np.complex128]
    populations: NDArray[np.float64]
    phases: NDArray[np.float64]
    currents: NDArray[np.float64]
    energy: NDArray[np.float64]
    winding: NDArray[np.float64]
    params: ModelParams
    schedule: CouplingSchedule
    options: IntegratorOptions
    norm_drift: float
    version: str = __version__
    segment_durations: tuple[float, ...] = ()

    @property
    def n_samples(self) -> int:
        return len(self.times)

    def norm_ok(self) -> bool:
        """Norm drift within the validation budget 1e-7 N_T."""
        return self.norm_drift <= 1e-7 * self.params.n_total


def step_rk4(state, t: float, dt: float, rhs):
    """One classical Runge-Kutta 4 step of rhs(t, state)."""
    if not (dt > 0):
        raise ParameterError(f"dt must be positive, got {dt}")
    y = np.asarray(state)
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k1)
    k3 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _schedule_smooth_in_segments(schedule: CouplingSchedule) -> bool:
    """True when K(t) is constant between declared breakpoints."""
    if schedule.kind in ("constant", "conveyor-open"):
        return True
    if schedule.kind in ("cut", "bottleneck"):
        return _schedule_smooth_in_segments(schedule.inner)
    return False


def _gauge_rate(params: ModelParams, y0) -> float:
    """Mean on-site rotation rate of the initial state, in omega_R units.

    Stepping proceeds in the frame rotating at this rate (an exact global
    gauge transform, undone at the recorded samples), which removes the
    fast common phase rotation and with it most of the norm drift.
    """
    inv_omega = 1.0 / params.omega_r
    us = params.u * params.n_total * inv_omega
    return float(np.mean(params.e0 * inv_omega
                         + us * (y0.real ** 2 + y0.imag ** 2)))


def _make_rhs(params: ModelParams, gauge: float = 0.0):
    """Scaled right-hand side dy/dtau = f(y, K_raw) in normalized amplitudes,
    in a frame rotating at `gauge` (omega_R units)."""
    n = params.n_wells
    inv_omega = 1.0 / params.omega_r
    e0s = params.e0 * inv_omega - gauge
    us = params.u * params.n_total * inv_omega
    ip1 = np.arange(1, n + 1) % n
    im1 = np.arange(-1, n - 1) % n

    def f(y, k_raw):
        ks = k_raw * inv_omega
        onsite = (e0s + us * (y.real ** 2 + y.imag ** 2)) * y
        return -1j * (onsite - ks * y[ip1] - ks[im1] * y[im1])

    return f


def _error_norm(err, y_old, y_new, abs_tol, rel_tol) -> float:
    scale = abs_tol + rel_tol * np.maximum(np.abs(y_old), np.abs(y_new))
    ratio = np.abs(err) / scale
    return float(np.sqrt(np.mean(ratio ** 2)))


def _advance_dopri(y, t0: float, t1: float, feval, options: IntegratorOptions,
                   dt: float):
    """Adaptive Dormand-Prince advance of y from t0 to t1.

    feval(t, y) must be smooth on [t0, t1].  Returns (y(t1), suggested dt).
    """
    t = t0
    k = [None] * 7
    rejects = 0
    saw_nonfinite = False
    # non-finite trial values are detected and handled; silence the fp flags
    with np.errstate(over="ignore", invalid="ignore"):
        k[0] = feval(t, y)
        while t < t1:
            h = dt if t + dt < t1 else t1 - t
            if h < 1e-13 * max(1.0, abs(t)):
                if saw_nonfinite:
                    raise DivergenceError(
                        "non-finite step values; integration diverged", t)
                raise StiffnessError(
                    f"step size underflow at t={t:.6g}; problem too stiff "
                    f"for the requested tolerances")
            for i in range(1, 7):
                yi = y + h * sum(_DP_A[i][j] * k[j] for j in range(i))
                k[i] = feval(t + _DP_C[i] * h, yi)
            y_new = y + h * sum(_DP_A[6][j] * k[j] for j in range(6))
            err = h * sum(_DP_E[j] * k[j] for j in range(7))
            if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(err))):
                saw_nonfinite = True
                dt = h * _SHRINK
                rejects += 1
                if rejects > _MAX_REJECTS:
                    raise DivergenceError(
                        "non-finite step values; integration diverged", t)
                continue
            err_norm = _error_norm(err, y, y_new, options.abs_tol,
                                   options.rel_tol)
            if err_norm <= 1.0:
                t = t + h
                y = y_new
                k[0] = k[6]
                factor = _GROW if err_norm == 0.0 else min(
                    _GROW, max(_SHRINK, _SAFETY * err_norm ** -0.2))
                dt = h * factor
                rejects = 0
                saw_nonfinite = False
            else:
                dt = h * max(_SHRINK, _SAFETY * err_norm ** -0.2)
                rejects += 1
                if rejects > _MAX_REJECTS:
                    raise StiffnessError(
                        f"{rejects} consecutive step rejections at t={t:.6g}")
    return y, dt


def _advance_rk4(y, t0: float, t1: float, feval, options: IntegratorOptions):
    """Fixed-step RK4 advance with the step adjusted to land exactly on t1."""
    span = t1 - t0
    m = max(1, int(math.ceil(span / options.dt - 1e-9)))
    h = span / m
    t = t0
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(m):
            k1 = feval(t, y)
            k2 = feval(t + 0.5 * h, y + (0.5 * h) * k1)
            k3 = feval(t + 0.5 * h, y + (0.5 * h) * k2)
            k4 = feval(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise DivergenceError(
                    "non-finite step values; integration diverged", t)
            t = t0 + (j + 1) * h
    return y


def _checkpoints(schedule: CouplingSchedule, options: IntegratorOptions):
    """Merged, flagged list of forced step boundaries in [0, max_time]."""
    t_max = options.max_time
    n_rec = int(math.floor(t_max / options.sample_interval + 1e-9))
    samples = np.arange(n_rec + 1) * options.sample_interval
    tol = 1e-12 * max(1.0, t_max)
    if t_max - samples[-1] > tol:
        samples = np.append(samples, t_max)
    breaks = sorted({float(b) for b in schedule.breakpoints if 0.0 < b < t_max})
    times: list[float] = []
    is_sample: list[bool] = []
    is_break: list[bool] = []
    merged = sorted([(float(t), True, False) for t in samples]
                    + [(b, False, True) for b in breaks])
    for t, smp, brk in merged:
        if times and t - times[-1] <= tol:
            is_sample[-1] = is_sample[-1] or smp
            is_break[-1] = is_break[-1] or brk
        else:
            times.append(t)
            is_sample.append(smp)
            is_break.append(brk)
    return times, is_sample, is_break


def _observables(times, states, params: ModelParams,
                 schedule: CouplingSchedule):
    psi = np.asarray(states)
    pops = np.abs(psi) ** 2
    phases = np.unwrap(np.angle(psi), axis=0)
    k_rows = np.array([schedule.vector(t) for t in times])
    hop = np.conj(psi) * np.roll(psi, -1, axis=1)
    currents = k_rows * hop.imag / params.omega_r
    energies = np.array([energy(psi[j], params, k_rows[j])
                         for j in range(len(times))])
    winding = np.empty(len(times))
    for j in range(len(times)):
        try:
            winding[j] = winding_number(psi[j])
        except WindingUndefinedError:
            winding[j] = np.nan
    return pops, phases, currents, energies, winding


def integrate(state0, params: ModelParams, schedule: CouplingSchedule,
              options: IntegratorOptions | None = None) -> Trajectory:
    """Integrate from t=0 to options.max_time and record the trajectory.

    state0 must carry params.n_total atoms within 1e-9 relative.  The run
    is deterministic: identical inputs produce bit-identical trajectories
    on one platform.
    """
    if options is None:
        options = IntegratorOptions()
    psi0 = check_state(state0, params.n_wells)
    if schedule.n_wells != params.n_wells:
        raise DimensionError(
            f"schedule is for {schedule.n_wells} wells, params for "
            f"{params.n_wells}")
    norm0 = total_atoms(psi0)
    if abs(norm0 - params.n_total) > 1e-9 * params.n_total:
        raise ParameterError(
            f"initial state carries {norm0:.6g} atoms, expected "
            f"{params.n_total:.6g} within 1e-9 relative")

    if schedule.is_feedback:
        durations, _ = _resolve_feedback(psi0, params, schedule, options)
        resolved = schedule.resolve(durations)
        traj = integrate(psi0, params, resolved, options)
        return replace(traj, segment_durations=durations)

    sqrt_nt = math.sqrt(params.n_total)
    y = psi0.astype(complex) / sqrt_nt
    gauge = _gauge_rate(params, y)
    f = _make_rhs(params, gauge)
    times, is_sample, is_break = _checkpoints(schedule, options)
    piecewise_const = _schedule_smooth_in_segments(schedule)

    rec_t: list[float] = []
    rec_y: list[np.ndarray] = []
    drift = 0.0

    def record(t, y):
        nonlocal drift
        rec_t.append(t)
        rec_y.append(y.copy())
        drift = max(drift, abs(float(np.sum(y.real ** 2 + y.imag ** 2)) - 1.0))

    if is_sample[0]:
        record(times[0], y)
    dt = min(1e-4, options.sample_interval)
    for j in range(len(times) - 1):
        t0, t1 = times[j], times[j + 1]
        guard = np.nextafter(t1, t0) if is_break[j + 1] else t1
        if piecewise_const:
            k_seg = schedule.vector(0.5 * (t0 + t1))
            feval = lambda t, yy, _k=k_seg: f(yy, _k)
        else:
            feval = lambda t, yy, _g=guard: f(yy, schedule.vector(min(t, _g)))
        if options.method == "rk4":
            y = _advance_rk4(y, t0, t1, feval, options)
        else:
            y, dt = _advance_dopri(y, t0, t1, feval, options, dt)
        if is_sample[j + 1]:
            record(t1, y)

    t_arr = np.array(rec_t)
    states = (np.array(rec_y) * sqrt_nt
              * np.exp(-1j * gauge * t_arr)[:, None])
    pops, phases, currents, energies, winding = _observables(
        t_arr, states, params, schedule)
    return Trajectory(
        times=t_arr, states=states, populations=pops, phases=phases,
        currents=currents, energy=energies, winding=winding, params=params,
        schedule=schedule, options=options,
        norm_drift=drift * params.n_total)


def resolve_feedback_durations(state0, params: ModelParams,
                               schedule: CouplingSchedule,
                               options: IntegratorOptions | None = None,
                               ) -> tuple[float, ...]:
    """Per-transfer durations of a feedback conveyor, without recording."""
    if options is None:
        options = IntegratorOptions()
    if not schedule.is_feedback:
        raise ParameterError("schedule is not a feedback conveyor")
    psi0 = check_state(state0, params.n_wells)
    norm0 = total_atoms(psi0)
    if abs(norm0 - params.n_total) > 1e-9 * params.n_total:
        raise ParameterError(
            f"initial state carries {norm0:.6g} atoms, expected "
            f"{params.n_total:.6g} within 1e-9 relative")
    durations, _ = _resolve_feedback(psi0, params, schedule, options)
    return durations


def populations_at(traj: Trajectory, times) -> np.ndarray:
    """Well populations at arbitrary times inside a recorded trajectory.

    Exact at sample instants; between samples the state is re-advanced
    from the nearest earlier sample with fixed RK4 substeps, split at
    schedule breakpoints, so segment edges that fall off the sample grid
    are still resolved sharply.
    """
    params = traj.params
    schedule = traj.schedule
    f = _make_rhs(params, 0.0)
    sqrt_nt = math.sqrt(params.n_total)
    targets = np.atleast_1d(np.asarray(times, float))
    out = np.empty((targets.size, params.n_wells))
    span_tol = 1e-12 * max(1.0, abs(float(traj.times[-1])))
    for row, target in enumerate(targets):
        if not (traj.times[0] - span_tol <= target
                <= traj.times[-1] + span_tol):
            raise ParameterError(
                f"time {target:g} lies outside the recorded range "
                f"[{traj.times[0]:g}, {traj.times[-1]:g}]")
        idx = max(int(np.searchsorted(traj.times, target, "right")) - 1, 0)
        tt = float(traj.times[idx])
        y = traj.states[idx] / sqrt_nt
        cuts = [b for b in schedule.breakpoints if tt < b < target]
        for t1 in [*cuts, float(target)]:
            span = t1 - tt
            if span <= span_tol:
                tt = t1
                continue
            guard = np.nextafter(t1, tt)
            rhs_t = lambda a, yy, _g=guard: f(yy, schedule.vector(min(a, _g)))
            m = max(4, int(math.ceil(span / 2e-3)))
            h = span / m
            for _ in range(m):
                y = step_rk4(y, tt, h, rhs_t)
                tt += h
            tt = t1
        out[row] = params.n_total * (y.real ** 2 + y.imag ** 2)
    return out


def _resolve_feedback(psi0, params: ModelParams, schedule: CouplingSchedule,
                      options: IntegratorOptions,
                      ) -> tuple[tuple[float, ...], tuple[np.ndarray, ...]]:
    """Event-detection pass: per-transfer durations of a feedback conveyor.

    The active link is raised to k_high; once the link current in the
    transport direction exceeds the floor the detector arms, and the
    transfer ends at the first downward crossing of that directed current
    through zero (refined by bisection with single RK4 substeps).  Returns
    the durations together with the well populations at each crossing.
    """
    sqrt_nt = math.sqrt(params.n_total)
    y = psi0.astype(complex) / sqrt_nt
    f = _make_rhs(params, _gauge_rate(params, y))
    n = params.n_wells
    durations: list[float] = []
    edge_pops: list[np.ndarray] = []
    t = 0.0
    dt = 1e-4

    def current_on(y, link, k_link):
        a, b = link, (link + 1) % n
        hop = np.conj(y[a]) * y[b]
        return k_link * params.n_total * hop.imag

    for seg in range(schedule.n_transfers):
        active = schedule.link_for_segment(seg)
        k_raw = np.full(n, schedule.k_low)
        k_raw[active] = schedule.k_high
        feval = lambda tt, yy, _k=k_raw: f(yy, _k)
        t_seg = t
        armed = False
        sign0 = float(schedule.direction)
        k = [None] * 7
        k[0] = feval(t, y)
        rejects = 0
        while True:
            if t - t_seg > schedule.timeout:
                raise StalledTransferError(
                    f"transfer {seg + 1} on link {active + 1} exceeded the "
                    f"{schedule.timeout:g}/omega_R timeout; raise k_high or "
                    f"the timeout")
            h = dt
            if h < 1e-13 * max(1.0, abs(t)):
                raise StiffnessError(
                    f"step size underflow at t={t:.6g} during transfer "
                    f"{seg + 1}")
            for i in range(1, 7):
                yi = y + h * sum(_DP_A[i][j] * k[j] for j in range(i))
                k[i] = feval(t + _DP_C[i] * h, yi)
            y_new = y + h * sum(_DP_A[6][j] * k[j] for j in range(6))
            err = h * sum(_DP_E[j] * k[j] for j in range(7))
            if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(err))):
                dt = h * _SHRINK
                rejects += 1
                if rejects > _MAX_REJECTS:
                    raise DivergenceError(
                        "non-finite step values; integration diverged", t)
                continue
            err_norm = _error_norm(err, y, y_new, options.abs_tol,
                                   options.rel_tol)
            if err_norm > 1.0:
                dt = h * max(_SHRINK, _SAFETY * err_norm ** -0.2)
                rejects += 1
                if rejects > _MAX_REJECTS:
                    raise StiffnessError(
                        f"{rejects} consecutive step rejections at t={t:.6g}")
                continue
            rejects = 0
            j_new = current_on(y_new, active, schedule.k_high)
            if not armed and j_new * sign0 > schedule.floor:
                armed = True
            elif armed and j_new * sign0 <= 0.0:
                lo, hi = 0.0, h
                rhs_t = lambda tt, yy: feval(tt, yy)
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if mid == lo or mid == hi:
                        break
                    y_mid = step_rk4(y, t, mid, rhs_t)
                    if current_on(y_mid, active, schedule.k_high) * sign0 > 0:
                        lo = mid
                    else:
                        hi = mid
                t_cross = t + hi
                y = step_rk4(y, t, hi, rhs_t)
                t = t_cross
                durations.append(t - t_seg)
                edge_pops.append(
                    params.n_total * (y.real ** 2 + y.imag ** 2))
                dt = max(dt, 1e-4)
                break
            t = t + h
            y = y_new
            k[0] = k[6]
            factor = _GROW if err_norm == 0.0 else min(
                _GROW, max(_SHRINK, _SAFETY * err_norm ** -0.2))
            dt = h * factor
    return tuple(durations), tuple(edge_pops)
