"""Exception and warning types shared across the package."""

from __future__ import annotations


class RingBecError(Exception):
    """Base class for all package errors."""


class ParameterError(RingBecError, ValueError):
    """Invalid or inconsistent model parameters."""


class DimensionError(RingBecError, ValueError):
    """Vector length does not match the number of wells."""


class PolarSingularityError(RingBecError, ValueError):
    """Polar right-hand side requested at a vanishing population."""


class WindingUndefinedError(RingBecError, ValueError):
    """Winding number requested while some well is empty."""


class DivergenceError(RingBecError, RuntimeError):
    """Integration produced NaN/Inf; carries the last good time."""

    def __init__(self, message: str, last_good_time: float):
        super().__init__(message)
        self.last_good_time = last_good_time


class StiffnessError(RingBecError, RuntimeError):
    """Adaptive step size underflowed."""


class StalledTransferError(RingBecError, RuntimeError):
    """Feedback conveyor detector never triggered within the timeout."""


class RootNotFoundError(RingBecError, RuntimeError):
    """Bracketed search found no sign change."""


class OutOfDomainError(RingBecError, ValueError):
    """Closed-form criterion evaluated outside its validity domain."""


class NoPeakError(RingBecError, ValueError):
    """Spectral peak below the noise floor."""


class NonUniformSamplingError(RingBecError, ValueError):
    """Spectral estimation requires uniform sampling."""


class ConfigError(RingBecError, ValueError):
    """Malformed, conflicting, or unknown configuration content."""


class ValidityWarning(UserWarning):
    """Model used outside its stated validity regime (small atom number)."""


class DegenerateScheduleWarning(UserWarning):
    """Schedule parameters degenerate to a simpler schedule."""
