"""Initial-condition builders for the standard protocols."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .errors import ParameterError
from .model import ModelParams, from_polar


def uniform_state(params: ModelParams) -> NDArray[np.complex128]:
    """Equal populations, equal phases."""
    n = params.n_wells
    return from_polar(np.full(n, params.n_total / n), np.zeros(n))


def winding_state(params: ModelParams, m: int = 1) -> NDArray[np.complex128]:
    """Equal populations with phases theta_j = 2 pi m j / n (winding m)."""
    n = params.n_wells
    phases = 2.0 * np.pi * m * np.arange(n) / n
    return from_polar(np.full(n, params.n_total / n), phases)


def seeded_state(params: ModelParams, seed: float,
                 well: int = 0) -> NDArray[np.complex128]:
    """Uniform state with a small population excess in one well.

    The excess is removed evenly from the other wells, keeping the total
    exactly params.n_total.
    """
    n = params.n_wells
    share = params.n_total / n
    if seed < 0 or seed >= share * (n - 1):
        raise ParameterError(
            f"seed must lie in [0, {share * (n - 1):g}), got {seed}")
    pops = np.full(n, share - seed / (n - 1))
    pops[well % n] = share + seed
    return from_polar(pops, np.zeros(n))


def single_well_state(params: ModelParams, fraction: float, well: int = 0,
                      phases=None) -> NDArray[np.complex128]:
    """fraction of N_T in one well, remainder split evenly over the others."""
    n = params.n_wells
    if not (0.0 < fraction <= 1.0):
        raise ParameterError(f"fraction must lie in (0, 1], got {fraction}")
    pops = np.full(n, params.n_total * (1.0 - fraction) / (n - 1))
    pops[well % n] = params.n_total * fraction
    if phases is None:
        phases = np.zeros(n)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (n,):
        raise ParameterError(f"phases must have shape ({n},)")
    return from_polar(pops, phases)
