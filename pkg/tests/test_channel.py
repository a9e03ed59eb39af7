import math

import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from mcrc.channel import (
    ImpulseResponse,
    impulse_response_at,
    log_response_ratio,
    midpoint_concentration,
    peak_time,
    receiver_concentration,
)
from mcrc.errors import DomainError, ValidationError
from mcrc.params import PUBLISHED_SETS, ChannelParams

from .oracles import green_mp

FORECAST = PUBLISHED_SETS["forecast_mg"]

# (4 pi D t)^-1.5 exp(-d^2 / 4Dt) at t = d^2/6D for D=1.02e-11, d=5.12e-6,
# evaluated once at 40 digits with mpmath (tests/oracles.py)
H_PEAK_FORECAST = 548479593153489.05


def make(**kw):
    base = dict(k_on=1e-18, k_off=2.0, symbol_duration_T=1.0, distance_d=4e-6,
                n_max=1e4, diffusion_D=5e-11)
    base.update(kw)
    return ChannelParams(**base)


params_strategy = st.builds(
    make,
    distance_d=st.floats(2e-6, 8e-6),
    diffusion_D=st.floats(1e-12, 1e-9),
    symbol_duration_T=st.floats(0.5, 2.5),
)


def test_kernel_vanishes_near_time_zero():
    assert impulse_response_at(FORECAST, 1e-6) == 0.0
    assert impulse_response_at(FORECAST, 1e-3) < 1e-100


def test_peak_value_matches_high_precision_oracle():
    h = ImpulseResponse(FORECAST)
    assert h.t_peak == pytest.approx(FORECAST.distance_d**2 / (6 * FORECAST.diffusion_D), rel=1e-15)
    assert h.peak_value == pytest.approx(H_PEAK_FORECAST, rel=1e-12)


@pytest.mark.parametrize("t", [0.01, 0.3, 1.0, 7.5, 100.0])
def test_kernel_matches_mpmath_pointwise(t):
    p = make()
    assert impulse_response_at(p, t) == pytest.approx(float(green_mp(5e-11, 4e-6, t)), rel=1e-13)


@pytest.mark.parametrize("t", [0.0, -1.0, float("nan")])
def test_non_positive_time_is_a_domain_error(t):
    with pytest.raises(DomainError):
        impulse_response_at(FORECAST, t)


def test_non_finite_params_rejected():
    with pytest.raises(ValidationError):
        make(diffusion_D=float("inf"))


@settings(max_examples=60, deadline=None)
@given(params_strategy, st.floats(0.3, 3.0))
def test_golden_section_finds_analytic_peak(p, guess_scale):
    t_peak = peak_time(p)
    # second pass re-centers the reference so the objective is small at the peak
    estimate = guess_scale * t_peak
    for _ in range(2):
        t_ref = estimate
        estimate = scipy.optimize.minimize_scalar(
            lambda t: -log_response_ratio(p, t, t_ref),
            bracket=(0.2 * t_peak, 5.0 * t_peak),
            method="golden", tol=1e-14,
        ).x
    assert estimate == pytest.approx(t_peak, rel=1e-9)


def test_log_ratio_agrees_with_direct_kernel():
    p = make()
    for t, t_ref in [(0.05, 0.2), (1.0, 0.04), (3.0, 3.0 + 1e-9)]:
        direct = math.log(impulse_response_at(p, t) / impulse_response_at(p, t_ref))
        assert log_response_ratio(p, t, t_ref) == pytest.approx(direct, rel=1e-6, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(params_strategy, st.floats(0.01, 50.0))
def test_kernel_non_negative_and_fades(p, t):
    assert impulse_response_at(p, t) >= 0.0
    assert impulse_response_at(p, 1e6) < impulse_response_at(p, peak_time(p))


def test_zero_inputs_give_zero_concentration():
    assert receiver_concentration(FORECAST, [0, 0, 0], np.linspace(0.1, 6, 7)).max() == 0.0


def test_single_pulse_at_one_symbol():
    p = FORECAST
    T = p.symbol_duration_T
    assert receiver_concentration(p, [1.0], T) == p.n_max * impulse_response_at(p, T)


def test_two_pulses_brute_force_superposition():
    p = make()
    T = p.symbol_duration_T
    expected = p.n_max * (float(green_mp(5e-11, 4e-6, 1.5 * T)) + float(green_mp(5e-11, 4e-6, 0.5 * T)))
    assert receiver_concentration(p, [1, 1], 1.5 * T) == pytest.approx(expected, rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(0, 0.5), min_size=1, max_size=12),
    st.lists(st.floats(0, 0.5), min_size=1, max_size=12),
    st.floats(0.01, 14.0),
)
def test_linearity(u1, u2, t):
    n = min(len(u1), len(u2))
    a, b = np.array(u1[:n]), np.array(u2[:n])
    p = make()
    lhs = receiver_concentration(p, a + b, t)
    rhs = receiver_concentration(p, a, t) + receiver_concentration(p, b, t)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=10), st.integers(1, 3), st.floats(0, 1))
def test_causality(u, k, new_value):
    p = make()
    t = (k - 0.5) * p.symbol_duration_T
    changed = list(u)
    for m in range(k, len(u)):
        changed[m] = new_value
    assert receiver_concentration(p, changed, t) == receiver_concentration(p, u, t)


def _past_fraction(p, k, frac=0.5, n=8):
    t = (k + frac) * p.symbol_duration_T
    u = np.ones(n)
    total = receiver_concentration(p, u, t)
    current = u[k] * p.n_max * impulse_response_at(p, frac * p.symbol_duration_T)
    return (total - current) / total


@pytest.mark.parametrize("D_lo, D_hi", [(1e-12, 1e-11), (1e-11, 1e-10), (1e-10, 1e-9)])
def test_isi_share_grows_as_diffusion_slows(D_lo, D_hi):
    for d in (2e-6, 4e-6, 8e-6):
        slow = _past_fraction(make(diffusion_D=D_lo, distance_d=d), 5)
        fast = _past_fraction(make(diffusion_D=D_hi, distance_d=d), 5)
        assert slow >= fast


@pytest.mark.parametrize("d_lo, d_hi", [(2e-6, 3e-6), (3e-6, 5e-6), (5e-6, 8e-6)])
def test_isi_share_grows_with_distance(d_lo, d_hi):
    for D in (1e-11, 1e-10, 1e-9):
        near = _past_fraction(make(diffusion_D=D, distance_d=d_lo), 5)
        far = _past_fraction(make(diffusion_D=D, distance_d=d_hi), 5)
        assert far >= near


def test_midpoint_superposition_matches_direct_sum():
    p = make()
    u = np.random.default_rng(3).random(6)
    dt = p.symbol_duration_T / 50
    fast = midpoint_concentration(p, u, dt, 300)
    direct = receiver_concentration(p, u, (np.arange(300) + 0.5) * dt)
    np.testing.assert_allclose(fast, direct, rtol=1e-12, atol=0)


def test_misaligned_grid_falls_back_to_direct_sum():
    p = make()
    u = [1.0, 0.3]
    dt = 0.0137
    c = midpoint_concentration(p, u, dt, 100)
    np.testing.assert_array_equal(c, receiver_concentration(p, u, (np.arange(100) + 0.5) * dt))


@pytest.mark.parametrize("u", [[-0.1], [1.2], [float("nan")], []])
def test_inputs_outside_unit_interval_rejected(u):
    with pytest.raises(ValidationError):
        receiver_concentration(make(), u, 1.0)


def test_params_invariants():
    with pytest.raises(ValidationError):
        make(k_on=0.0)
    with pytest.raises(ValidationError):
        make(n_max=0.5)
    with pytest.raises(ValidationError):
        ChannelParams(1e-18, 1.0, 1.0, 1e-6, 10, 1e-11, memory_window_L=0)
    p = make()
    assert p.K_D == p.k_off / p.k_on > 0
    assert ChannelParams.from_dict(p.to_dict(microns=True)) == p
