"""Signal utilities shared by the scenario runners.

All functions are pure.  Time axes are in 1/omega_R units, so spectral
frequencies come out as angular frequencies in units of omega_R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import NonUniformSamplingError, NoPeakError, ParameterError

_MIN_SAMPLES = 64


@dataclass(frozen=True)
class SpectralEstimate:
    """FFT peak location after windowing and quadratic interpolation.

    frequency and resolution are angular, in units of omega_R; resolution
    is the pre-interpolation bin spacing 2 pi / (window length).
    """

    frequency: float
    amplitude: float
    resolution: float
    window: str


def _window(name: str, n: int) -> NDArray[np.float64]:
    if name == "hann":
        return np.hanning(n)
    if name in ("rect", "boxcar"):
        return np.ones(n)
    raise ParameterError(f"unknown window {name!r}; use 'hann' or 'rect'")


def dominant_frequency(times, values, window: str = "hann") -> SpectralEstimate:
    """Angular frequency of the largest non-DC spectral peak.

    Requires at least 64 uniformly spaced samples.  The mean is removed
    before windowing; a series with no oscillating content raises
    NoPeakError.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(values, dtype=float)
    if t.shape != x.shape or t.ndim != 1:
        raise ParameterError("times and values must be equal-length 1-d arrays")
    n = len(x)
    if n < _MIN_SAMPLES:
        raise ParameterError(
            f"need at least {_MIN_SAMPLES} samples, got {n}")
    steps = np.diff(t)
    dt = float(np.mean(steps))
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-9 * dt:
        raise NonUniformSamplingError(
            "samples are not uniformly spaced; resample before spectral "
            "estimation")
    x = x - np.mean(x)
    if np.max(np.abs(x)) <= 1e-12 * max(1.0, float(np.max(np.abs(values)))):
        raise NoPeakError("series is constant; no spectral peak")
    w = _window(window, n)
    spec = np.abs(np.fft.rfft(x * w))
    if len(spec) < 3:
        raise ParameterError("series too short for peak interpolation")
    k = int(np.argmax(spec[1:])) + 1
    if spec[k] <= 0:
        raise NoPeakError("empty spectrum; no peak found")
    # 3-point quadratic interpolation on log magnitude around the peak bin.
    delta = 0.0
    if 1 <= k < len(spec) - 1 and spec[k - 1] > 0 and spec[k + 1] > 0:
        la, lb, lc = np.log(spec[k - 1: k + 2])
        denom = la - 2.0 * lb + lc
        if denom < 0:
            delta = 0.5 * (la - lc) / denom
            delta = float(np.clip(delta, -0.5, 0.5))
    resolution = 2.0 * np.pi / (n * dt)
    freq = (k + delta) * resolution
    amp = 2.0 * spec[k] / np.sum(w)
    return SpectralEstimate(frequency=float(freq), amplitude=float(amp),
                            resolution=float(resolution), window=window)


def detect_sign_change(series, t_axis, floor: float = 0.0) -> float | None:
    """First zero crossing of the series, linearly interpolated, or None.

    With floor > 0 the detector arms only once |series| exceeds the floor,
    then reports the first return through zero; this is the trigger rule
    used by the feedback conveyor.
    """
    s = np.asarray(series, dtype=float)
    t = np.asarray(t_axis, dtype=float)
    if s.shape != t.shape or s.ndim != 1 or len(s) < 2:
        raise ParameterError("series and t_axis must be equal-length 1-d "
                             "arrays of at least 2 samples")
    if floor < 0:
        raise ParameterError(f"floor must be nonnegative, got {floor}")
    sign0 = 0.0
    prev = None
    for j in range(len(s)):
        if sign0 == 0.0:
            if abs(s[j]) > floor:
                sign0 = np.sign(s[j])
                prev = j
            continue
        if s[j] * sign0 <= 0.0:
            t0, t1 = t[prev], t[j]
            s0, s1 = s[prev], s[j]
            return float(t0 + (t1 - t0) * s0 / (s0 - s1))
        prev = j
    return None


def crosscorr_lag(a, b, max_lag: int | None = None) -> int:
    """Signed sample lag maximizing the cross-correlation of two series.

    Positive lag means b is a delayed copy of a.  Ties among equal maxima
    are resolved by their mean, which keeps crosscorr_lag(a, b) equal to
    -crosscorr_lag(b, a) exactly.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("series must be equal-length 1-d arrays")
    n = len(x)
    if n < 2:
        raise ParameterError("series too short for correlation")
    x = x - np.mean(x)
    y = y - np.mean(y)
    if np.max(np.abs(x)) == 0.0 or np.max(np.abs(y)) == 0.0:
        raise ParameterError("flat series have no correlation peak")
    # full[k] = sum_n y[n + k - (n-1)] x[n]; lag L = k - (n-1) maximizes
    # sum a[n] b[n + L] when b is a delayed by L.
    full = np.correlate(y, x, mode="full")
    lags = np.arange(-(n - 1), n)
    if max_lag is not None:
        if max_lag < 1:
            raise ParameterError(f"max_lag must be >= 1, got {max_lag}")
        keep = np.abs(lags) <= max_lag
        full = full[keep]
        lags = lags[keep]
    top = np.max(full)
    tol = 1e-12 * max(1.0, abs(top))
    winners = lags[full >= top - tol]
    return int(np.rint(np.mean(winners)))
