"""Coupling schedules K_i(t) realizing the simulated protocols.

Schedules are immutable rule objects; evaluation is pure.  K_i couples wells
i and i+1 (modulo the ring size).  All schedules guarantee K_i(t) >= 0.
Schedule times (arguments to vector(), stop/cut times, durations, timeouts)
are in units of 1/omega_R; the coupling values returned are energies in the
raw hbar = 1 units expected by the model right-hand sides.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateScheduleWarning, OutOfDomainError, ParameterError
from .model import ModelParams


@dataclass(frozen=True)
class CouplingSchedule:
    """Time-dependent coupling rule with declared discontinuity times.

    Feedback schedules (kind "conveyor-feedback") cannot be evaluated as a
    pure function of time; the integrator resolves their segment durations
    event by event and records an equivalent open-loop schedule.
    """

    kind: str
    n_wells: int
    description: str
    breakpoints: tuple[float, ...] = ()
    value: float = 0.0
    depth: float = 0.0
    w: float = 0.0
    phi: float = 0.0
    t_stop: float = math.inf
    link: int = 0
    t_cut: float = math.inf
    factor: float = 1.0
    k_low: float = 0.0
    k_high: float = 0.0
    durations: tuple[float, ...] = ()
    n_transfers: int = 0
    start_link: int = 0
    direction: int = 1
    floor: float = 0.0
    timeout: float = math.inf
    inner: "CouplingSchedule | None" = None

    @property
    def is_feedback(self) -> bool:
        return self.kind == "conveyor-feedback"

    def link_for_segment(self, segment: int) -> int:
        return (self.start_link + self.direction * segment) % self.n_wells

    def vector(self, t: float) -> NDArray[np.float64]:
        """Coupling vector K(t)."""
        if self.kind == "constant":
            return np.full(self.n_wells, self.value)
        if self.kind == "modulated":
            if t >= self.t_stop:
                return np.full(self.n_wells, self.value)
            sgn = np.where(np.arange(self.n_wells) % 2 == 0, -1.0, 1.0)
            return self.value * (1.0 + self.depth * sgn
                                 * math.sin(self.w * t + self.phi))
        if self.kind == "cut":
            k = self.inner.vector(t)
            if t >= self.t_cut:
                k = k.copy()
                k[self.link] = 0.0
            return k
        if self.kind == "bottleneck":
            k = self.inner.vector(t).copy()
            k[self.link] *= self.factor
            return k
        if self.kind == "conveyor-open":
            k = np.full(self.n_wells, self.k_low)
            edges = np.cumsum(self.durations)
            seg = int(np.searchsorted(edges, t, side="right"))
            if seg < len(self.durations):
                k[self.link_for_segment(seg)] = self.k_high
            return k
        if self.kind == "conveyor-feedback":
            raise ParameterError(
                "feedback schedule has no closed form; integrate() resolves it")
        raise ParameterError(f"unknown schedule kind {self.kind!r}")

    def resolve(self, durations: tuple[float, ...]) -> "CouplingSchedule":
        """Open-loop equivalent of a feedback schedule with measured durations."""
        if not self.is_feedback:
            raise ParameterError("only feedback schedules can be resolved")
        return CouplingSchedule(
            kind="conveyor-open", n_wells=self.n_wells,
            description=self.description + " (resolved)",
            breakpoints=tuple(np.cumsum(durations)),
            k_low=self.k_low, k_high=self.k_high, durations=tuple(durations),
            n_transfers=self.n_transfers, start_link=self.start_link,
            direction=self.direction)


def constant_schedule(k_tilde: float, n_wells: int = 4) -> CouplingSchedule:
    """All couplings fixed at k_tilde for all times."""
    if k_tilde < 0:
        raise ParameterError(f"coupling must be nonnegative, got {k_tilde}")
    return CouplingSchedule(kind="constant", n_wells=n_wells,
                            description=f"constant K={k_tilde:g}",
                            value=float(k_tilde))


def resonant_modulation(params: ModelParams, depth: float = 1.0,
                        w: float | None = None,
                        phi: float = 0.0) -> CouplingSchedule:
    """Alternating-sign modulation K_i(t) = K (1 + (-1)^i depth sin(w t + phi)).

    The sign alternates with the 1-based well index, so K_1 starts with the
    -sin branch.  Defaults to the four-well closed-form drive frequency.
    w is given in raw hbar = 1 units (as returned by resonance_frequency);
    the stored schedule converts it to the 1/omega_R clock.
    """
    if not (0.0 <= depth <= 1.0):
        raise ParameterError(f"depth must lie in [0, 1], got {depth}")
    if w is None:
        w = resonance_frequency(params)
    if depth == 0.0:
        return constant_schedule(params.k_tilde, params.n_wells)
    return CouplingSchedule(
        kind="modulated", n_wells=params.n_wells,
        description=(f"modulated K={params.k_tilde:g} depth={depth:g} "
                     f"w={w:g} phi={phi:g}"),
        value=params.k_tilde, depth=float(depth),
        w=float(w) / params.omega_r, phi=float(phi))


def stop_modulation(schedule: CouplingSchedule, tau: float) -> CouplingSchedule:
    """Freeze a modulated schedule to its mean value for t >= tau."""
    if schedule.kind != "modulated":
        raise ParameterError("stop_modulation applies to modulated schedules")
    return replace(schedule, t_stop=float(tau),
                   breakpoints=schedule.breakpoints + (float(tau),),
                   description=schedule.description + f" stop={tau:g}")


def resonance_frequency(params: ModelParams) -> float:
    """Closed-form drive frequency w = sqrt(3 U N_T K + 2 K^2), four wells only."""
    if params.n_wells != 4:
        raise OutOfDomainError(
            "closed-form drive frequency is specific to 4 wells; use "
            "linearized_resonance_measured for other ring sizes")
    return math.sqrt(3.0 * params.u * params.n_total * params.k_tilde
                     + 2.0 * params.k_tilde ** 2)


def cut_link(base: CouplingSchedule, link: int, t_cut: float) -> CouplingSchedule:
    """Set one coupling to zero for t >= t_cut."""
    link = link % base.n_wells
    if base.kind == "cut" and base.link == link:
        return replace(base, t_cut=min(base.t_cut, float(t_cut)))
    if not math.isfinite(t_cut):
        return base
    return CouplingSchedule(
        kind="cut", n_wells=base.n_wells,
        description=base.description + f" cut link {link + 1} at t={t_cut:g}",
        breakpoints=base.breakpoints + (float(t_cut),),
        link=link, t_cut=float(t_cut), inner=base)


def bottleneck(base: CouplingSchedule, link: int, factor: float) -> CouplingSchedule:
    """Scale one coupling by a constant factor for all times."""
    if factor <= 0:
        raise ParameterError(f"bottleneck factor must be positive, got {factor}")
    if factor == 1.0:
        return base
    link = link % base.n_wells
    return CouplingSchedule(
        kind="bottleneck", n_wells=base.n_wells,
        description=base.description + f" bottleneck link {link + 1} x{factor:g}",
        breakpoints=base.breakpoints, link=link, factor=float(factor),
        inner=base)


def conveyor_schedule(params: ModelParams, k_low: float, k_high: float,
                      mode: str = "feedback",
                      durations: tuple[float, ...] | None = None,
                      n_transfers: int | None = None, start_link: int = 0,
                      direction: int = 1, floor: float | None = None,
                      timeout: float = 30.0) -> CouplingSchedule:
    """Cyclic transport schedule: one link raised to k_high at a time.

    Open-loop mode takes explicit per-transfer durations.  Feedback mode
    raises the active link until the current through it, taken in the
    transport direction, first crosses back through zero after exceeding
    the floor (default 1e-3 N_T omega_R), then advances to the next link;
    after n_transfers segments all links rest at k_low.
    """
    if not (0.0 <= k_low < k_high) and k_low != k_high:
        raise ParameterError(f"need 0 <= k_low < k_high, got {k_low}, {k_high}")
    if k_low == k_high:
        warnings.warn("k_high equals k_low; conveyor degenerates to a constant "
                      "schedule", DegenerateScheduleWarning, stacklevel=2)
        return constant_schedule(k_low, params.n_wells)
    if direction not in (1, -1):
        raise ParameterError(f"direction must be +1 or -1, got {direction}")
    if mode == "open-loop":
        if not durations:
            raise ParameterError("open-loop conveyor needs per-transfer durations")
        durations = tuple(float(d) for d in durations)
        if any(d <= 0 for d in durations):
            raise ParameterError("per-transfer durations must be positive")
        return CouplingSchedule(
            kind="conveyor-open", n_wells=params.n_wells,
            description=(f"conveyor open-loop k_low={k_low:g} k_high={k_high:g} "
                         f"{len(durations)} transfers"),
            breakpoints=tuple(np.cumsum(durations)),
            k_low=float(k_low), k_high=float(k_high), durations=durations,
            n_transfers=len(durations), start_link=start_link % params.n_wells,
            direction=direction)
    if mode == "feedback":
        if n_transfers is None or n_transfers < 1:
            raise ParameterError("feedback conveyor needs n_transfers >= 1")
        if floor is None:
            floor = 1e-3 * params.n_total * params.omega_r
        return CouplingSchedule(
            kind="conveyor-feedback", n_wells=params.n_wells,
            description=(f"conveyor feedback k_low={k_low:g} k_high={k_high:g} "
                         f"{n_transfers} transfers"),
            k_low=float(k_low), k_high=float(k_high),
            n_transfers=int(n_transfers), start_link=start_link % params.n_wells,
            direction=direction, floor=float(floor), timeout=float(timeout))
    raise ParameterError(f"unknown conveyor mode {mode!r}")
