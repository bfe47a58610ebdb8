"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import ringbec as rb

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def params100():
    return rb.make_params(lam=100.0)


@pytest.fixture
def params500():
    return rb.make_params(lam=500.0)


def random_state(params, rng, floor=2e-3):
    """Random ring state with every population above floor * N_T."""
    while True:
        raw = rng.uniform(floor, 1.0, params.n_wells)
        pops = params.n_total * raw / raw.sum()
        if pops.min() > floor * params.n_total:
            break
    phases = rng.uniform(-np.pi, np.pi, params.n_wells)
    return rb.from_polar(pops, phases)


def rel_dev(got, want):
    """Max deviation relative to the scale of the reference block."""
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    scale = max(float(np.max(np.abs(want))), 1.0)
    return float(np.max(np.abs(got - want))) / scale
