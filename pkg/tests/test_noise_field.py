import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from artifact.domain_kernels import DomainSpec, GridBasis, KernelEvaluator
from artifact.noise_field import (
    Field,
    NoiseBatch,
    SpaceTimeGrid,
    conditional_smoothing_exponent,
    discrete_variance,
    free_line_variance,
    mode_variance,
    periodic_variance,
    replica_generator,
    sample_noise,
    smoothed_density,
    stochastic_convolution,
)


def test_grid_validation():
    dom = DomainSpec.periodic()
    g = SpaceTimeGrid.for_domain(dom, 64, 0.25)
    assert g.cfl == pytest.approx(0.25)
    assert g.horizon == pytest.approx(0.25)
    with pytest.raises(ValueError):
        SpaceTimeGrid.for_domain(dom, 64, 0.25, dt=0.3)
    with pytest.raises(ValueError):
        g.step_of(0.5)
    with pytest.raises(ValueError):
        SpaceTimeGrid(1, 1.0, 1, 1.0)


def test_same_seed_identical_and_batching_invariant():
    g = SpaceTimeGrid.for_domain(DomainSpec.periodic(), 16, 2.0**-4, dt=2.0**-10)
    a = sample_noise(g, 7, 3).increments
    b = sample_noise(g, 7, 3).increments
    np.testing.assert_array_equal(a, b)
    batch = np.concatenate(list(NoiseBatch(g, 7, [1, 3, 5]).blocks(5)), axis=1)
    np.testing.assert_array_equal(batch[1], sample_noise(g, 7, 3).standard())
    assert not np.array_equal(a, sample_noise(g, 7, 4).increments)


def test_pooled_variance_band():
    # 10^6 cells of variance dt dx = 1e-6; chi-square band is about +-0.3%
    g = SpaceTimeGrid(1000, 1e-3, 1000, 1e-3)
    xi = sample_noise(g, 2024).increments
    assert 0.99e-6 <= xi.var() <= 1.01e-6
    assert abs(xi.mean()) <= 5 * 1e-3 / 1000


def test_distinct_seeds_uncorrelated():
    g = SpaceTimeGrid(500, 2e-3, 200, 1e-3)
    a = sample_noise(g, 1).standard().ravel()
    b = sample_noise(g, 2).standard().ravel()
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) <= 3 / math.sqrt(a.size)


def test_streams_are_distinct():
    a = replica_generator(5, 0, 0).standard_normal(8)
    b = replica_generator(5, 0, 1).standard_normal(8)
    assert not np.array_equal(a, b)


@pytest.mark.parametrize("scheme", ["explicit", "semi_implicit", "exponential"])
def test_stochastic_convolution_starts_at_zero(scheme):
    dom = DomainSpec.periodic()
    g = SpaceTimeGrid.for_domain(dom, 32, 2.0**-6)
    V = stochastic_convolution(sample_noise(g, 3), KernelEvaluator(dom), scheme=scheme)
    assert np.all(V.at_step(0) == 0.0)
    assert V.values.shape == (g.nt + 1, 32)


def test_field_validation():
    g = SpaceTimeGrid(4, 0.25, 2, 0.1)
    with pytest.raises(ValueError):
        Field(g, np.array([0, 1]), np.zeros((3, 4)))
    with pytest.raises(ValueError):
        Field(g, np.array([0]), np.full((1, 4), np.nan))


def test_closed_form_variances():
    # int_0^t g_{2r}(0) dr by quadrature
    for t in (0.01, 0.25, 1.0):
        q, _ = integrate.quad(lambda r: 1 / math.sqrt(4 * math.pi * r), 0, t)
        assert free_line_variance(t) == pytest.approx(q, rel=1e-10)
    # periodic image-sum variance agrees with the line at short times
    assert periodic_variance(1e-3) == pytest.approx(free_line_variance(1e-3), rel=1e-6)
    assert periodic_variance(0.16) >= free_line_variance(0.16)


@settings(max_examples=30, deadline=None)
@given(steps=st.integers(1, 200), cfl=st.floats(0.05, 0.5), scheme=st.sampled_from(["explicit", "semi_implicit"]))
def test_mode_variance_matches_recursion(steps, cfl, scheme):
    b = GridBasis(DomainSpec.periodic(), 16)
    dt = cfl * b.dx**2
    v = np.zeros_like(b.eig)
    for _ in range(steps):
        if scheme == "explicit":
            v = (1 + dt * b.eig) ** 2 * v + dt / b.dx
        else:
            v = (v + dt / b.dx) / (1 - dt * b.eig) ** 2
    np.testing.assert_allclose(mode_variance(b, scheme, dt, steps), v, rtol=1e-10)


@pytest.mark.parametrize("kind", ["periodic", "neumann"])
def test_discrete_variance_converges_to_continuum(kind):
    dom = DomainSpec(kind)
    t = 0.04
    errs = []
    for nx in (64, 128, 256):
        g = SpaceTimeGrid.for_domain(dom, nx, t, dt=t / 64)
        errs.append(abs(discrete_variance(dom, g, "exponential", 64, dom.node_index(0.5, nx)) - periodic_variance(t)))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] / periodic_variance(t) < 0.02


@pytest.mark.parametrize("kind", ["periodic", "neumann"])
def test_discrete_lnd_lower_bound(kind):
    # Var(V_t - P_{t-s} V_s) is the variance after t - s fresh steps
    dom = DomainSpec(kind)
    nx = 256
    dt = 2.0**-14
    g = SpaceTimeGrid.for_domain(dom, nx, 0.25, dt=dt)
    for node in (0, nx // 3, nx // 2):
        for k in (64, 256, 1024, 4096):
            v = discrete_variance(dom, g, "exponential", k, node)
            assert v >= math.sqrt(k * dt / math.pi) * (1 - 1e-3)


def test_smoothed_density_closed_form():
    for v, eps in [(0.1, 0.01), (0.5, 2.0**-12), (1.0, 1.0)]:
        q, _ = integrate.quad(
            lambda z: math.exp(-z * z / (2 * eps)) / math.sqrt(2 * math.pi * eps)
            * math.exp(-z * z / (2 * v)) / math.sqrt(2 * math.pi * v), -np.inf, np.inf, epsabs=1e-13)
        assert smoothed_density(v, eps) == pytest.approx(q, rel=1e-8)


def test_smoothing_exponent_trivial_functional():
    dom = DomainSpec.free_line(2.0)
    scales = [2.0**-k for k in range(8, 1, -1)]
    fit = conditional_smoothing_exponent(KernelEvaluator(dom), np.ones_like, scales, 100, 256, seed=1,
                                         dt=2.0**-8)
    assert fit.exponent == 0.0
    assert not fit.extra["saturated"]


def test_smoothing_saturation_flag():
    dom = DomainSpec.free_line(2.0)
    eps = 0.05
    fit = conditional_smoothing_exponent(KernelEvaluator(dom), lambda v: np.exp(-v * v / (2 * eps)),
                                         [2.0**-k for k in range(9, 2, -1)], 100, 128, eps=eps, dt=2.0**-9)
    assert fit.extra["saturated"]
