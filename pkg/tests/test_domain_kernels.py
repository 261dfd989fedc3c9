import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.domain_kernels import (
    DomainSpec,
    GridBasis,
    KernelEvaluator,
    diagonal_bounds,
    gaussian,
    image_count,
    kernel_eval,
    kernel_holder_constants,
    semigroup_apply,
)

DOMAINS = [DomainSpec.free_line(2.0), DomainSpec.periodic(), DomainSpec.neumann()]
IDS = ["free_line", "periodic", "neumann"]


def brute_neumann(t, x, y, n_img=2000):
    n = np.arange(-n_img, n_img + 1)
    return gaussian(t, x - y + 2 * n).sum() + gaussian(t, x + y + 2 * n).sum()


def test_free_line_peak():
    k = KernelEvaluator(DomainSpec.free_line(10.0))
    assert kernel_eval(1 / (2 * math.pi), 0.0, 0.0, k) == pytest.approx(1.0, rel=1e-14)


def test_neumann_against_brute_image_sum():
    k = KernelEvaluator(DomainSpec.neumann())
    for x, y in [(0.0, 0.0), (0.3, 0.9), (1.0, 0.2)]:
        assert kernel_eval(0.01, x, y, k) == pytest.approx(brute_neumann(0.01, x, y), rel=1e-12)
    # corner value is twice the free peak up to images
    assert kernel_eval(0.01, 0.0, 0.0, k) >= 2 * gaussian(0.01, 0.0)


def test_rejects_nonpositive_time():
    k = KernelEvaluator(DomainSpec.periodic())
    with pytest.raises(ValueError):
        kernel_eval(0.0, 0.1, 0.2, k)
    with pytest.raises(ValueError):
        kernel_eval(-1.0, 0.1, 0.2, k)


def test_domain_validation():
    with pytest.raises(ValueError):
        DomainSpec.free_line(0.0)
    with pytest.raises(ValueError):
        DomainSpec("dirichlet")
    with pytest.raises(ValueError):
        DomainSpec.periodic(n_images=0)


@pytest.mark.parametrize("dom", DOMAINS, ids=IDS)
@pytest.mark.parametrize("t", [1e-4, 1e-3, 0.05, 0.3, 1.0])
def test_mass_symmetry_positivity(dom, t):
    k = KernelEvaluator(dom)
    # fine midpoint rule; the integrand is smooth and periodic (or even-reflected)
    n = max(20000, int(40 * dom.length / math.sqrt(t)))
    y = dom.lower + (np.arange(n) + 0.5) * dom.length / n
    for x in (dom.lower + 0.1 * dom.length, dom.lower + 0.5 * dom.length, dom.lower):
        vals = kernel_eval(t, x, y, k)
        assert np.all(vals >= 0)
        assert vals.sum() * dom.length / n == pytest.approx(1.0, abs=1e-8)
    xs = np.linspace(dom.lower, dom.lower + dom.length, 17)
    m = kernel_eval(t, xs[:, None], xs[None, :], k)
    np.testing.assert_array_equal(m, m.T)


@pytest.mark.parametrize("dom", DOMAINS, ids=IDS)
def test_diagonal_bounds_every_sample(dom):
    k = KernelEvaluator(dom)
    times = np.logspace(-4, 0, 13)
    pts = np.linspace(dom.lower, dom.lower + dom.length, 11)
    rep = diagonal_bounds(k, times, pts)
    assert rep["lower_ok"]
    upper = rep["empirical_constant"] + 2 / np.sqrt(2 * np.pi * times)[:, None]
    assert np.all(rep["diagonal"] <= upper + 1e-12)
    assert math.isfinite(rep["empirical_constant"])


@pytest.mark.parametrize("dom", DOMAINS, ids=IDS)
def test_doubling_images_within_tail_bound(dom):
    for t in (1e-3, 0.1, 1.0):
        n = image_count(t, dom.period)
        k1 = KernelEvaluator(DomainSpec(dom.kind, dom.half_width, n))
        k2 = KernelEvaluator(DomainSpec(dom.kind, dom.half_width, 2 * n))
        xs = np.linspace(dom.lower, dom.lower + dom.length, 9)
        p1 = kernel_eval(t, xs[:, None], xs[None, :], k1)
        diff = np.abs(p1 - kernel_eval(t, xs[:, None], xs[None, :], k2))
        # Neumann sums two image families; the longer sum may round differently
        factor = 2 if dom.kind == "neumann" else 1
        rounding = 2 * (2 * n + 1) * np.finfo(float).eps * np.abs(p1)
        assert np.all(diff <= factor * k1.tail_bound(t) + rounding)


def test_semigroup_identities():
    k = KernelEvaluator(DomainSpec.periodic())
    nx = 256
    x = DomainSpec.periodic().nodes(nx)
    f = np.cos(2 * np.pi * x)
    np.testing.assert_array_equal(semigroup_apply(0.0, f, k), f)
    np.testing.assert_allclose(semigroup_apply(0.3, np.full(nx, 2.5), k), 2.5, rtol=0, atol=1e-14)
    for t in (0.001, 0.02, 0.1):
        np.testing.assert_allclose(semigroup_apply(t, f, k), np.exp(-2 * np.pi**2 * t) * f, atol=1e-10)


def _band_limited(seed, nx, dom, modes=6):
    rng = np.random.default_rng(seed)
    x = dom.nodes(nx)
    out = np.zeros(nx)
    for m in range(1, modes + 1):
        if dom.kind == "neumann":
            out += rng.normal() * np.cos(np.pi * m * x)
        else:
            out += rng.normal() * np.cos(2 * np.pi * m * x) + rng.normal() * np.sin(2 * np.pi * m * x)
    return out


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), s=st.floats(1e-3, 0.05), t=st.floats(1e-3, 0.05),
       kind=st.sampled_from(["periodic", "neumann"]))
def test_chapman_kolmogorov(seed, s, t, kind):
    dom = DomainSpec(kind)
    k = KernelEvaluator(dom)
    f = _band_limited(seed, 256, dom)
    lhs = semigroup_apply(t, semigroup_apply(s, f, k), k)
    rhs = semigroup_apply(t + s, f, k)
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), t=st.floats(1e-4, 1.0))
def test_semigroup_contraction(seed, t):
    k = KernelEvaluator(DomainSpec.neumann())
    f = np.random.default_rng(seed).uniform(-3, 3, 128)
    assert np.max(np.abs(semigroup_apply(t, f, k))) <= np.max(np.abs(f)) + 1e-12


def test_holder_constants():
    k = KernelEvaluator(DomainSpec.free_line(4.0))
    r0 = kernel_holder_constants(k, 0.0)
    assert r0["max_space_integral"] <= 2.0 + 1e-9
    r1 = kernel_holder_constants(k, 1.0, times=np.logspace(-4, -1, 7), separations=[1e-3])
    ratios = r1["table"][:, 2]
    # ratio to |x1-x2| t^{-1/2} is stable across the sweep
    assert ratios.max() / ratios.min() <= 1.2
    # the small-separation limit is E|Z| / sqrt(t) * 2 g(0) ... = sqrt(2/pi)
    assert ratios.mean() == pytest.approx(math.sqrt(2 / math.pi), rel=0.05)
    rh = kernel_holder_constants(k, 0.5, times=np.logspace(-4, -1, 7))
    assert math.isfinite(rh["time_ratio"]) and rh["time_ratio"] < 10
    with pytest.raises(ValueError):
        kernel_holder_constants(k, 1.5)


@pytest.mark.parametrize("dom", DOMAINS, ids=IDS)
def test_grid_basis_roundtrip_and_eigen(dom):
    nx = 64
    b = GridBasis(dom, nx)
    v = np.random.default_rng(1).normal(size=nx)
    np.testing.assert_allclose(b.inverse(b.forward(v)), v, atol=1e-13)
    # eigenvalues of the discrete Laplacian stencil
    lap = np.zeros((nx, nx))
    for i in range(nx):
        lap[i, i] = -1.0
        if dom.kind == "neumann":
            lap[i, max(i - 1, 0)] += 0.5
            lap[i, min(i + 1, nx - 1)] += 0.5
        else:
            lap[i, (i - 1) % nx] += 0.5
            lap[i, (i + 1) % nx] += 0.5
    lap /= b.dx**2
    ev = np.sort(np.linalg.eigvalsh(lap))
    ours = np.sort(np.repeat(b.eig, b.multiplicity.astype(int)))
    np.testing.assert_allclose(ours, ev, atol=1e-8 * abs(ev).max())
    w = sum(b.node_weights(i) for i in range(nx))
    np.testing.assert_allclose(w, b.multiplicity, rtol=1e-12)
