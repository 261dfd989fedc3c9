import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.analysis import (
    AdditiveGerm,
    InsufficientSamples,
    LeftPointGerm,
    OccupationGerm,
    SaturationError,
    SewingObserver,
    estimate_moment,
    fit_slope,
    offset_difference_slope,
    regularization_exponent,
    run_sewing,
    saturation_guard,
    sewing_rate,
    simulate_increments,
    span_ok,
    vclass_seminorm,
)
from artifact.domain_kernels import DomainSpec
from artifact.drifts import Smooth
from artifact.noise_field import SpaceTimeGrid

PER = DomainSpec.periodic()


def test_moment_of_constant():
    est = estimate_moment(np.full(150, -3.0), m=3)
    assert est.value == 3.0 and est.stderr == 0.0 and est.sufficient


def test_moment_of_normal():
    x = np.random.default_rng(0).standard_normal(20000)
    e2 = estimate_moment(x, 2)
    assert abs(e2.value - 1.0) <= 4 * e2.stderr
    e4 = estimate_moment(x, 4)
    assert abs(e4.value - 3 ** 0.25) <= 4 * e4.stderr
    assert estimate_moment(lambda r: (-1.0) ** r, 2, replicas=100).value == 1.0


def test_moment_validation():
    with pytest.raises(ValueError):
        estimate_moment(np.ones(99))
    with pytest.raises(ValueError):
        estimate_moment(np.ones(200), resamples=50)
    bad = np.ones(200)
    bad[17] = np.inf
    with pytest.raises(FloatingPointError, match="replica 17"):
        estimate_moment(bad)
    with pytest.raises(ValueError):
        estimate_moment(np.ones(200), replicas=150)
    # heavy tails make the 8th moment unreliable at this size
    heavy = np.random.default_rng(1).standard_t(3, 200)
    assert not estimate_moment(heavy, 8).sufficient


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), m1=st.floats(1, 6), dm=st.floats(0, 4))
def test_lyapunov_monotone(seed, m1, dm):
    x = np.random.default_rng(seed).standard_cauchy(120)
    assert estimate_moment(x, m1).value <= estimate_moment(x, m1 + dm).value * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-2, 2), c=st.floats(0.01, 100))
def test_fit_recovers_power_law(a, c):
    s = 2.0 ** -np.arange(3, 11)
    fit = fit_slope(s, c * s**a)
    assert fit.exponent == pytest.approx(a, abs=1e-9)
    if abs(a) > 1e-3:
        # for a nearly flat line R^2 is dominated by rounding
        assert fit.rsquared == pytest.approx(1.0, abs=1e-9)
    assert fit.within(a, 1e-8)


def test_fit_validation_and_dyadic_levels():
    assert span_ok([1, 2, 4, 8, 16, 32])
    assert not span_ok([1, 2, 4, 8, 16])
    assert span_ok([1, 10, 50, 100])
    with pytest.raises(ValueError):
        fit_slope([1, 2, 4, 8], [1, 2, 3, 4])
    with pytest.raises(ValueError):
        fit_slope([1, 2, 4, 8, 16, 32], [1, 2, 0, 4, 5, 6])
    lev = np.arange(6)
    fit = fit_slope(lev, 2.0 ** (-0.5 * lev), check_span=False, base=2.0)
    assert fit.exponent == pytest.approx(-0.5, abs=1e-12)
    assert fit.rows()[0] == (0.0, 1.0, 0.0)


def test_vclass_of_zero_and_constant():
    g = SpaceTimeGrid.for_domain(PER, 32, 2.0**-4)
    starts = [0.0, 2.0**-6]
    gaps = [g.dt * 2**k for k in range(0, 8)]
    c = 1.5
    times, data, _ = simulate_increments(Smooth.constant(c).mollify(0.1), PER, g, starts, gaps, 120, seed=3)
    kappa = 0.75
    rep = vclass_seminorm(times, data, kappa)
    top = max(gap for _, gap in times)
    assert rep.seminorm == pytest.approx(c * top ** (1 - kappa), rel=1e-9)
    assert rep.fit.exponent == pytest.approx(1.0, abs=1e-9)
    zero = vclass_seminorm(times, np.zeros_like(data), kappa)
    assert zero.seminorm == 0.0 and zero.fit is None
    with pytest.raises(ValueError):
        vclass_seminorm(times, data, 1.0)
    heavy = np.random.default_rng(2).standard_t(2.5, data.shape)
    with pytest.raises(InsufficientSamples):
        vclass_seminorm(times, heavy, kappa, m=8)


def test_saturation_guard():
    saturation_guard(1e-4, 0.01)
    with pytest.raises(SaturationError):
        saturation_guard(0.05, 0.01)


def test_occupation_of_constant_is_linear():
    fit = regularization_exponent(Smooth.constant(2.0).mollify(1e-4), PER, 32,
                                  [2.0**-k for k in range(12, 5, -1)], 100, dt=2.0**-14)
    np.testing.assert_allclose(fit.values, 2.0 * fit.scales, rtol=1e-12)
    assert fit.exponent == pytest.approx(1.0, abs=1e-10)


def test_offset_difference_is_linear_for_smooth_drift():
    fit = offset_difference_slope(Smooth("gaussian").mollify(0.05), PER, 32, 2.0**-5, 0.3,
                                  [2.0**-k for k in range(10, 4, -1)], 100)
    assert fit.exponent == pytest.approx(1.0, abs=0.02)


def test_additive_germ_sums_agree_exactly():
    g = SpaceTimeGrid.for_domain(PER, 32, 2.0**-5)
    sums = run_sewing(AdditiveGerm(lambda st: st.V[:, 4] ** 2 - st.V[:, 9]), PER, g, 0.0, g.horizon, 5, 100, seed=1)
    assert np.all(sums == sums[:, :1])
    rate = sewing_rate(sums)
    assert rate.exponent == math.inf and rate.extra["cauchy"]


def test_riemann_germ_is_cauchy():
    g = SpaceTimeGrid.for_domain(PER, 32, 2.0**-4)
    sums = run_sewing(LeftPointGerm(5), PER, g, 0.0, g.horizon, 6, 200, seed=2)
    rate = sewing_rate(sums)
    assert rate.extra["cauchy"]
    # Brownian-in-time increments at a point are 1/4-Hoelder: each level gains about 2^{-3/4}
    assert rate.exponent == pytest.approx(0.75, abs=0.15)


def test_sewing_rate_on_synthetic_geometric_differences():
    z = np.random.default_rng(4).standard_normal((150, 1))
    diffs = z * 2.0 ** (-0.5 * np.arange(6))
    sums = np.concatenate([np.zeros((150, 1)), np.cumsum(diffs, axis=1)], axis=1)
    assert sewing_rate(sums).exponent == pytest.approx(0.5, abs=1e-9)


def test_sewing_validation():
    g = SpaceTimeGrid.for_domain(PER, 32, 2.0**-5)
    with pytest.raises(ValueError):
        SewingObserver(LeftPointGerm(0), g, 0, 3, 2, 10)
    with pytest.raises(ValueError):
        OccupationGerm(DomainSpec.neumann(), 32, 0.01, 1.0, 0)
