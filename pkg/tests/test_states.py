"""Initial-condition builders."""

import numpy as np
import pytest

import ringbec as rb
from ringbec.errors import ParameterError


def test_uniform_state(params100):
    psi = rb.uniform_state(params100)
    assert np.allclose(np.abs(psi) ** 2, params100.n_total / 4.0, rtol=1e-14)
    assert np.all(psi.imag == 0)
    assert np.all(psi.real > 0)


def test_winding_state_phases(params100):
    psi = rb.winding_state(params100, 1)
    pops, th = rb.to_polar(psi)
    assert np.allclose(pops, params100.n_total / 4.0, rtol=1e-14)
    steps = rb.principal_value(np.roll(th, -1) - th)
    assert np.allclose(steps, np.pi / 2.0, atol=1e-12)
    assert rb.winding_number(psi) == 1
    assert rb.winding_number(rb.winding_state(params100, -1)) == -1


def test_seeded_state_moves_excess_evenly(params100):
    p = params100
    psi = rb.seeded_state(p, 100.0)
    pops = np.abs(psi) ** 2
    assert pops[0] == pytest.approx(25100.0, rel=1e-12)
    assert np.allclose(pops[1:], 25000.0 - 100.0 / 3.0, rtol=1e-12)
    assert rb.total_atoms(psi) == pytest.approx(p.n_total, rel=1e-12)


def test_seeded_state_respects_well_argument(params100):
    pops = np.abs(rb.seeded_state(params100, 50.0, well=2)) ** 2
    assert np.argmax(pops) == 2


def test_seeded_state_zero_is_uniform(params100):
    assert np.allclose(rb.seeded_state(params100, 0.0),
                       rb.uniform_state(params100))


@pytest.mark.parametrize("seed", [-1.0, 7.5e4, 1e9])
def test_seeded_state_range_checked(params100, seed):
    with pytest.raises(ParameterError):
        rb.seeded_state(params100, seed)


def test_single_well_state_split(params100):
    p = params100
    pops = np.abs(rb.single_well_state(p, 0.97)) ** 2
    assert pops[0] == pytest.approx(0.97 * p.n_total, rel=1e-12)
    assert np.allclose(pops[1:], 0.01 * p.n_total, rtol=1e-12)


def test_single_well_state_full_fraction(params100):
    pops = np.abs(rb.single_well_state(params100, 1.0, well=3)) ** 2
    assert pops[3] == pytest.approx(params100.n_total, rel=1e-14)
    assert np.all(pops[:3] == 0.0)


def test_single_well_state_custom_phases(params100):
    ph = np.array([0.1, 0.2, 0.3, 0.4])
    psi = rb.single_well_state(params100, 0.5, phases=ph)
    _, th = rb.to_polar(psi)
    assert np.allclose(rb.principal_value(th - ph), 0.0, atol=1e-12)


@pytest.mark.parametrize("fraction", [0.0, -0.5, 1.5])
def test_single_well_state_fraction_checked(params100, fraction):
    with pytest.raises(ParameterError):
        rb.single_well_state(params100, fraction)


def test_single_well_state_phase_shape_checked(params100):
    with pytest.raises(ParameterError):
        rb.single_well_state(params100, 0.5, phases=[0.0, 0.1])
