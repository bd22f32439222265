import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lqsdwsn.channel import (
    ChannelParams,
    delivery_probability,
    delivery_probability_array,
    distance_at_probability,
    effective_radius,
    instability_band,
    sample_link_event,
    sample_link_events,
    mean_attenuation,
)


def oracle_p(x_over_r0, alpha=3, sigma=4):
    """Closed form evaluated in 40-digit arithmetic."""
    with mpmath.workdps(40):
        g = mpmath.mpf(10 * alpha) / (mpmath.sqrt(2) * sigma)
        return float(mpmath.mpf("0.5") - mpmath.erf(g * mpmath.log10(mpmath.mpf(x_over_r0))) / 2)


def test_default_radius(params):
    # 10 ** (66 / 30)
    assert params.r0_m == pytest.approx(158.48931924611135, rel=1e-14)
    assert params.rssi_floor_dbm == -66.0


def test_half_at_r0(params):
    assert delivery_probability(params.r0_m, params) == 0.5


@pytest.mark.parametrize("t", [0.1, 0.5, 0.8, 1.0, 1.2, 1.5, 2.0, 3.0])
def test_matches_high_precision_oracle(params, t):
    assert delivery_probability(t * params.r0_m, params) == pytest.approx(oracle_p(t), abs=1e-14)


def test_frozen_values(params):
    # computed once by oracle_p
    assert delivery_probability(2 * params.r0_m, params) == pytest.approx(0.011981405817905168, abs=1e-14)
    assert delivery_probability(3 * params.r0_m, params) == pytest.approx(1.7284582293185418e-4, abs=1e-15)


def test_zero_and_negative(params):
    assert delivery_probability(0.0, params) == 1.0
    with pytest.raises(ValueError):
        delivery_probability(-1.0, params)
    with pytest.raises(ValueError):
        sample_link_event(0.0, params, np.random.default_rng(0))


def test_invalid_params():
    with pytest.raises(ValueError):
        effective_radius(0, 66)
    with pytest.raises(ValueError):
        ChannelParams(sigma=0)
    with pytest.raises(ValueError):
        ChannelParams(r0_override=-5)


def test_override_reanchors_threshold():
    p = ChannelParams(r0_override=150.0)
    assert p.r0_m == 150.0 and not p.r0_derived
    assert delivery_probability(150.0, p) == 0.5
    assert float(mean_attenuation(150.0, p)) == pytest.approx(p.beta_th)
    rng = np.random.default_rng(4)
    rate = np.mean([sample_link_event(150.0, p, rng).received for _ in range(20000)])
    assert rate == pytest.approx(0.5, abs=0.015)


@pytest.mark.parametrize("t", [0.5, 0.8, 1.0, 1.2, 1.5])
def test_monte_carlo_rate(params, t):
    x = t * params.r0_m
    rec, _ = sample_link_events(np.full(100_000, float(mean_attenuation(x, params))), params, np.random.default_rng(7))
    assert rec.mean() == pytest.approx(delivery_probability(x, params), abs=0.01)


def test_rssi_and_reception_share_one_draw(params):
    rng = np.random.default_rng(1)
    for _ in range(2000):
        d = sample_link_event(params.r0_m, params, rng)
        assert d.received == (d.rssi_dbm > params.rssi_floor_dbm)


def test_vector_draw_matches_scalar_draws(params):
    xs = np.array([40.0, 150.0, 220.0])
    a, b = np.random.default_rng(3), np.random.default_rng(3)
    rec, rssi = sample_link_events(mean_attenuation(xs, params), params, a)
    scalar = [sample_link_event(x, params, b) for x in xs]
    assert rec.tolist() == [s.received for s in scalar]
    assert np.allclose(rssi, [s.rssi_dbm for s in scalar], rtol=0, atol=1e-12)


@given(st.floats(1e-3, 1e4), st.floats(1e-3, 1e4))
def test_monotone_decreasing(a, b):
    p = ChannelParams()
    lo, hi = sorted((a, b))
    assert delivery_probability(lo, p) >= delivery_probability(hi, p)
    assert 0.0 <= delivery_probability(hi, p) <= 1.0


@given(st.floats(0.05, 20.0))
def test_log_symmetry_about_r0(t):
    p = ChannelParams()
    assert delivery_probability(p.r0_m * t, p) + delivery_probability(p.r0_m / t, p) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.01, 0.99))
def test_inverse(prob):
    p = ChannelParams()
    assert delivery_probability(distance_at_probability(prob, p), p) == pytest.approx(prob, abs=1e-9)


@given(st.floats(1.5, 6.0), st.floats(1.0, 10.0))
def test_band_brackets_r0(alpha, sigma):
    p = ChannelParams(alpha=alpha, sigma=sigma)
    lo, hi = instability_band(p)
    assert lo < p.r0_m < hi
    assert delivery_probability(lo, p) == pytest.approx(0.7, abs=1e-9)
    # band widens with sigma at fixed alpha
    lo2, hi2 = instability_band(ChannelParams(alpha=alpha, sigma=sigma * 1.5))
    assert hi2 - lo2 > hi - lo


def test_array_matches_scalar(params):
    xs = np.linspace(0, 400, 41)
    ref = [delivery_probability(float(x), params) for x in xs]
    assert np.allclose(delivery_probability_array(xs, params), ref, rtol=0, atol=1e-14)
    assert math.isclose(ref[0], 1.0)
