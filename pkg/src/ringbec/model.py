"""Mean-field model of a Bose-Einstein condensate on a ring of potential wells.

State is a complex amplitude per well, psi_i = sqrt(N_i) exp(i theta_i), with
|psi_i|^2 the atom count of well i.  Couplings K_i join wells i and i+1
(indices modulo the ring size).  hbar = 1 throughout; derivatives returned by
the right-hand sides are per unit raw time, while all trajectory-level times
are expressed in units of 1/omega_R = 1/(2 K_tilde).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import (
    DimensionError,
    ParameterError,
    PolarSingularityError,
    ValidityWarning,
    WindingUndefinedError,
)

MIN_ATOMS_VALID = 1e3


@dataclass(frozen=True)
class ModelParams:
    """Ring geometry, atom number, coupling scale, and interaction strength.

    lam and u are mutually consistent: lam = u * n_total / (2 * k_tilde).
    """

    n_wells: int
    n_total: float
    k_tilde: float
    lam: float
    u: float
    e0: NDArray[np.float64]
    omega_r: float
    low_atom_warning: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "e0", np.asarray(self.e0, dtype=float))
        if self.e0.shape != (self.n_wells,):
            raise DimensionError(
                f"e0 has shape {self.e0.shape}, expected ({self.n_wells},)")


def make_params(n_wells: int = 4, n_total: float = 1e5, k_tilde: float = 0.5,
                lam: float | None = None, u: float | None = None,
                e0=None) -> ModelParams:
    """Build ModelParams from exactly one of (lam, u); the other is derived."""
    if n_wells < 3:
        raise ParameterError(f"ring needs at least 3 wells, got {n_wells}")
    if not (k_tilde > 0):
        raise ParameterError(f"k_tilde must be positive, got {k_tilde}")
    if not (n_total > 0):
        raise ParameterError(f"n_total must be positive, got {n_total}")
    if (lam is None) == (u is None):
        raise ParameterError("exactly one of lam and u must be given")
    if lam is None:
        lam = u * n_total / (2.0 * k_tilde)
    else:
        u = 2.0 * lam * k_tilde / n_total
    if e0 is None:
        e0 = np.zeros(n_wells)
    e0 = np.asarray(e0, dtype=float)
    if e0.ndim == 0:
        e0 = np.full(n_wells, float(e0))
    low = bool(n_total < MIN_ATOMS_VALID)
    if low:
        warnings.warn(
            f"n_total={n_total:g} is below {MIN_ATOMS_VALID:g}; the mean-field "
            "description is unreliable at small atom number", ValidityWarning,
            stacklevel=2)
    return ModelParams(n_wells=n_wells, n_total=float(n_total),
                       k_tilde=float(k_tilde), lam=float(lam), u=float(u),
                       e0=e0, omega_r=2.0 * float(k_tilde),
                       low_atom_warning=low)


def check_state(psi: NDArray[np.complex128], n_wells: int) -> NDArray[np.complex128]:
    """Validate an amplitude vector: length, finiteness, positive total norm."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (n_wells,):
        raise DimensionError(f"state has shape {psi.shape}, expected ({n_wells},)")
    if not np.all(np.isfinite(psi)):
        raise ParameterError("state contains NaN/Inf amplitudes")
    if not (float(np.sum(np.abs(psi) ** 2)) > 0):
        raise ParameterError("state has zero total norm")
    return psi


def from_polar(populations, phases) -> NDArray[np.complex128]:
    """Amplitudes from populations and phases: psi = sqrt(N) exp(i theta)."""
    populations = np.asarray(populations, dtype=float)
    phases = np.asarray(phases, dtype=float)
    if populations.shape != phases.shape:
        raise DimensionError("populations and phases differ in length")
    if np.any(populations < 0):
        raise ParameterError("populations must be nonnegative")
    return np.sqrt(populations) * np.exp(1j * phases)


def to_polar(psi) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Populations and principal-value phases of an amplitude vector."""
    psi = np.asarray(psi, dtype=complex)
    return np.abs(psi) ** 2, np.angle(psi)


def rhs_complex(psi: NDArray[np.complex128], params: ModelParams,
                k: NDArray[np.float64]) -> NDArray[np.complex128]:
    """d psi_i / dt = -i [(E0_i + U |psi_i|^2) psi_i - K_i psi_{i+1} - K_{i-1} psi_{i-1}]."""
    psi = np.asarray(psi)
    k = np.asarray(k, dtype=float)
    if psi.shape != (params.n_wells,) or k.shape != (params.n_wells,):
        raise DimensionError(
            f"state/coupling lengths {psi.shape}/{k.shape} do not match "
            f"n_wells={params.n_wells}")
    onsite = (params.e0 + params.u * np.abs(psi) ** 2) * psi
    hop = k * np.roll(psi, -1) + np.roll(k, 1) * np.roll(psi, 1)
    return -1j * (onsite - hop)


def rhs_polar(populations: NDArray[np.float64], phases: NDArray[np.float64],
              params: ModelParams, k: NDArray[np.float64],
              ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Population/phase form of the equations of motion.

    dN_i/dt = -2 K_i sqrt(N_i N_{i+1}) sin(theta_{i+1}-theta_i)
              +2 K_{i-1} sqrt(N_{i-1} N_i) sin(theta_i-theta_{i-1})
    dtheta_i/dt = K_i sqrt(N_{i+1}/N_i) cos(theta_{i+1}-theta_i)
                  + K_{i-1} sqrt(N_{i-1}/N_i) cos(theta_i-theta_{i-1})
                  - U N_i - E0_i

    The population line carries the factor 2 required for exact equivalence
    with rhs_complex under psi = sqrt(N) exp(i theta).  Singular at N_i = 0;
    use the complex form near empty wells.
    """
    n = np.asarray(populations, dtype=float)
    th = np.asarray(phases, dtype=float)
    k = np.asarray(k, dtype=float)
    if n.shape != (params.n_wells,) or th.shape != (params.n_wells,) \
            or k.shape != (params.n_wells,):
        raise DimensionError("populations/phases/couplings must have length n_wells")
    if np.any(n <= 0):
        raise PolarSingularityError(
            "polar form is singular at zero population; use rhs_complex")
    n_up = np.roll(n, -1)
    n_dn = np.roll(n, 1)
    th_up = np.roll(th, -1)
    th_dn = np.roll(th, 1)
    k_dn = np.roll(k, 1)
    d_up = th_up - th
    d_dn = th - th_dn
    dn = (-2.0 * k * np.sqrt(n * n_up) * np.sin(d_up)
          + 2.0 * k_dn * np.sqrt(n_dn * n) * np.sin(d_dn))
    dth = (k * np.sqrt(n_up / n) * np.cos(d_up)
           + k_dn * np.sqrt(n_dn / n) * np.cos(d_dn)
           - params.u * n - params.e0)
    return dn, dth


def total_atoms(psi) -> float:
    """Sum of well populations."""
    return float(np.sum(np.abs(np.asarray(psi)) ** 2))


def energy(psi: NDArray[np.complex128], params: ModelParams,
           k: NDArray[np.float64]) -> float:
    """Conserved energy for time-independent couplings and offsets.

    H = sum_i [E0_i N_i + (U/2) N_i^2] - sum_i K_i 2 Re(psi_i* psi_{i+1})
    """
    psi = np.asarray(psi)
    k = np.asarray(k, dtype=float)
    n = np.abs(psi) ** 2
    onsite = np.sum(params.e0 * n + 0.5 * params.u * n ** 2)
    bond = np.sum(k * 2.0 * np.real(np.conj(psi) * np.roll(psi, -1)))
    return float(onsite - bond)


def link_current(psi: NDArray[np.complex128], params: ModelParams,
                 k: NDArray[np.float64], link: int | None = None):
    """Current J_i = K_i sqrt(N_i N_{i+1}) sin(theta_{i+1} - theta_i) on link i.

    Positive J_i carries atoms from well i to well i+1; the population balance
    is dN_i/dt = 2 (J_{i-1} - J_i).  Computed as K_i Im(psi_i* psi_{i+1}),
    which is regular at empty wells.
    """
    psi = np.asarray(psi)
    k = np.asarray(k, dtype=float)
    j = k * np.imag(np.conj(psi) * np.roll(psi, -1))
    if link is None:
        return j
    return float(j[link % params.n_wells])


def principal_value(angle):
    """Reduce an angle difference to the branch (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(angle), 2.0 * np.pi)


def winding_number(psi) -> int:
    """Net phase winding around the ring in units of 2 pi."""
    psi = np.asarray(psi)
    n, th = to_polar(psi)
    if np.any(n <= 0):
        raise WindingUndefinedError("winding undefined while some well is empty")
    steps = principal_value(np.roll(th, -1) - th)
    return int(np.rint(np.sum(steps) / (2.0 * np.pi)))
