"""Scenario drivers: confinement criterion, driven growth, transport."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import ringbec as rb
from ringbec.errors import (
    OutOfDomainError,
    ParameterError,
    RootNotFoundError,
)
from ringbec.scenarios import (
    SelfTrapInput,
    critical_imbalance_analytic,
    critical_imbalance_simulated,
    linearized_resonance_measured,
    run_conveyor,
    run_persistent_current,
    run_small_amplitude,
    selfconfine_residual,
)


# ------------------------------------------------------ confinement criterion


def test_residual_at_printed_operating_point():
    # N1 = 35000 of 1e5 atoms -> n = 2/15; the residual comes out +0.511
    point = SelfTrapInput(n1=35000.0, lam=100.0, n_total=1e5)
    assert point.n == pytest.approx(2.0 / 15.0, rel=1e-12)
    assert selfconfine_residual(point.n, point.lam) == pytest.approx(
        0.511, abs=1e-3)


def test_residual_matches_direct_evaluation():
    n, lam = 0.21, 150.0
    expect = (2.0 / (3.0 * n)) * math.tan(
        -3.0 * math.sqrt(3.0) / (4.0 * lam * n)) + 1.0
    assert selfconfine_residual(n, lam) == expect


@given(n=st.floats(0.02, 0.33), lam=st.floats(50.0, 1000.0))
def test_residual_is_even(n, lam):
    assert selfconfine_residual(n, lam) == selfconfine_residual(-n, lam)


def test_residual_limits():
    with pytest.raises(ParameterError):
        selfconfine_residual(0.0, 100.0)
    with pytest.raises(OutOfDomainError):
        selfconfine_residual(0.005, 100.0)
    # infinitely strong interactions confine any imbalance
    assert selfconfine_residual(0.1, 1e9) == pytest.approx(1.0, abs=1e-6)


def test_self_trap_input_range():
    with pytest.raises(ParameterError):
        SelfTrapInput(n1=-1.0, lam=100.0, n_total=1e5)
    with pytest.raises(ParameterError):
        SelfTrapInput(n1=2e5, lam=100.0, n_total=1e5)


def test_analytic_thresholds_at_lam100():
    up, lo = critical_imbalance_analytic(100.0, 1e5)
    # symmetric about N_T / 4 by construction
    assert up - 25000.0 == pytest.approx(25000.0 - lo, abs=1e-6)
    assert abs(up - 31750.0) < 500.0
    assert abs(lo - 18250.0) < 500.0


def test_analytic_threshold_scales_inversely_with_sqrt_lambda():
    # small-angle reduction of the criterion: n* ~ sqrt(sqrt(3)/(2 Lambda))
    def n_star(lam):
        up, _ = critical_imbalance_analytic(lam, 1e5)
        return (4.0 * up / 1e5 - 1.0) / 3.0

    ratio = n_star(200.0) / n_star(100.0)
    assert ratio == pytest.approx(1.0 / math.sqrt(2.0), rel=0.02)


def test_analytic_threshold_out_of_domain():
    with pytest.raises(RootNotFoundError):
        critical_imbalance_analytic(1.0, 1e5)
    with pytest.raises(ParameterError):
        critical_imbalance_analytic(-5.0, 1e5)


def test_simulated_thresholds_bracket_quarter_filling():
    up, lo, report = critical_imbalance_simulated(100.0, 1e5, horizon=10.0)
    assert up is not None and lo is not None
    assert lo < 25000.0 < up
    assert report.labels == {"confined": "found", "depleted": "found"}
    a, b = report.measured["bracket_confined"]
    assert a <= up <= b
    with pytest.raises(ParameterError):
        critical_imbalance_simulated(100.0, 1e5, horizon=5.0)


# --------------------------------------------------------------- driven seed


def test_driven_growth_and_post_stop_stability(params500):
    traj, report = run_small_amplitude(params500, tau_stop=4.0)
    m = report.measured
    assert m["growth_factor"] > 10.0
    assert m["direction"] in (-1, 1)
    assert 0.8 <= m["post_stop_ratio_min"] <= 1.0
    assert 1.0 <= m["post_stop_ratio_max"] <= 1.2
    # adjacent wells move a quarter period apart in a circulating pattern
    assert abs(m["lag_12"]) >= 1
    assert traj.times[-1] == pytest.approx(12.0)


def test_beat_metrics_without_stop(params500):
    _, report = run_small_amplitude(params500, max_time=30.0,
                                    sample_interval=0.005)
    m = report.measured
    assert m["beat_peak_amplitude"] > 0.0
    assert math.isfinite(m["beat_period"])
    # several envelope revivals fit inside the window
    assert 0.0 < m["beat_period"] < 15.0


def test_phase_flip_reverses_direction(params500):
    _, fwd = run_small_amplitude(params500, tau_stop=4.0)
    _, rev = run_small_amplitude(params500, tau_stop=4.0, phi=np.pi)
    assert rev.measured["direction"] == -fwd.measured["direction"]


# ------------------------------------------------------- persistent current


def test_unperturbed_circulation_is_flat(params100):
    traj, report = run_persistent_current(params100, max_time=50.0)
    assert report.measured["flatness"] < 1e-3
    assert report.measured["winding_constant"]
    assert np.all(traj.winding == 1.0)


def test_cut_reroutes_into_upstream_well(params100):
    _, report = run_persistent_current(params100, t_cut=0.5, link=0,
                                       max_time=8.0)
    m = report.measured
    # current m=1 flows 0 -> 1 -> 2 -> 3; cutting link 0-1 piles up in well 0
    assert m["filling_well"] == 0
    assert m["peak_population"] > 0.3 * params100.n_total
    assert m["peak_time_after_cut"] == pytest.approx(0.37, abs=0.05)


def test_bottleneck_oscillation_grows_with_factor(params100):
    amps = []
    periods = []
    for factor in (1.2, 1.4, 1.6):
        _, report = run_persistent_current(params100, factor=factor,
                                           link=0, max_time=12.0)
        amps.append(report.measured["osc_amplitude"])
        periods.append(report.measured["osc_period"])
    assert amps[0] < amps[1] < amps[2]
    assert all(p > 0 for p in periods)


def test_cut_and_bottleneck_are_exclusive(params100):
    with pytest.raises(ParameterError):
        run_persistent_current(params100, t_cut=0.5, factor=1.2)


# ------------------------------------------------------------------ conveyor


def test_feedback_conveyor_one_turn(params100):
    traj, report = run_conveyor(params100, n_turns=1, post_window=5.0)
    m = report.measured
    assert len(m["fidelities"]) == 4
    assert m["min_fidelity"] >= 0.9
    assert m["turns"] == 1
    assert m["post_stop_max_dev_frac"] < 0.05
    assert traj.segment_durations == m["durations"]


def test_open_loop_replay_reproduces_feedback(params100):
    _, fb = run_conveyor(params100, n_turns=1, post_window=2.0)
    _, ol = run_conveyor(params100, n_turns=1, post_window=2.0,
                         mode="open-loop",
                         durations=fb.measured["durations"])
    got = np.array(ol.measured["fidelities"])
    want = np.array(fb.measured["fidelities"])
    assert np.max(np.abs(got - want)) < 1e-3


def test_conveyor_zero_turns_reports_stability(params100):
    _, report = run_conveyor(params100, n_turns=0, post_window=5.0)
    assert report.measured["turns"] == 0
    assert report.measured["post_stop_max_dev_frac"] < 0.05


def test_conveyor_validation(params100):
    with pytest.raises(ParameterError):
        run_conveyor(params100, initial_fraction=0.5)
    with pytest.raises(ParameterError):
        run_conveyor(params100, mode="open-loop")
    with pytest.raises(ParameterError):
        run_conveyor(params100, mode="sideways")


# ----------------------------------------------------------------- resonance


def test_measured_resonance_matches_linearization(params100):
    """Oracle: eigenfrequencies of the numerically linearized flow.

    Finite-difference Jacobian of the complex equation around the uniform
    state, no assumptions about mode structure shared with the package.
    """
    p = params100
    psi0 = rb.uniform_state(p).astype(complex)
    k = np.full(4, p.k_tilde)
    # rotate at the chemical potential so the uniform state is a fixed point
    mu = p.u * p.n_total / 4.0 - 2.0 * p.k_tilde

    def f(z):
        y = z[:4] + 1j * z[4:]
        dy = rb.rhs_complex(y, p, k) + 1j * mu * y
        return np.concatenate([dy.real, dy.imag])

    z0 = np.concatenate([psi0.real, psi0.imag])
    assert np.max(np.abs(f(z0))) < 1e-9 * np.sqrt(p.n_total)
    eps = 1e-3 * np.sqrt(p.n_total)
    jac = np.empty((8, 8))
    for col in range(8):
        dz = np.zeros(8)
        dz[col] = eps
        jac[:, col] = (f(z0 + dz) - f(z0 - dz)) / (2.0 * eps)
    eig = np.linalg.eigvals(jac)
    freqs = np.unique(np.round(np.abs(eig.imag) / p.omega_r, 6))
    freqs = freqs[freqs > 1e-3]

    measured = linearized_resonance_measured(p)
    assert np.min(np.abs(freqs - measured)) / measured < 0.01
