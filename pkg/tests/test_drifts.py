import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from artifact.drifts import (
    BesovIndex,
    DiracAt,
    FiniteMeasure,
    LinearCombination,
    PowerLaw,
    PowerLawMinus,
    PowerLawPlus,
    PrincipalValue,
    Smooth,
    drift_from_dict,
    mollified_eval,
    scaled_drift,
    scaling_constants,
    scaling_limit_target,
)


def g(eps, z):
    return math.exp(-z * z / (2 * eps)) / math.sqrt(2 * math.pi * eps)


def quad_mollify(f, eps, x, points=None):
    s = math.sqrt(eps)
    val, _ = integrate.quad(lambda y: f(y) * g(eps, x - y), x - 14 * s, x + 14 * s, points=points,
                            limit=400, epsabs=1e-13, epsrel=1e-12)
    return val


@pytest.mark.parametrize("eps", [1e-3, 0.05, 1.0])
def test_dirac_and_measure_closed_form(eps):
    x = np.linspace(-1, 1, 7)
    np.testing.assert_allclose(DiracAt(2.0, 0.3).mollified(eps, x), [2 * g(eps, v - 0.3) for v in x], rtol=1e-13)
    mu = FiniteMeasure(((0.0, 1.0), (0.5, -0.25)))
    total, _ = integrate.quad(lambda v: float(mu.mollified(eps, v)), -20, 20, points=[0, 0.5], limit=200)
    assert total == pytest.approx(0.75, abs=1e-9)
    assert not mu.nonnegative


@pytest.mark.parametrize("name", ["indicator", "odd_rational", "gaussian"])
@pytest.mark.parametrize("eps", [1e-3, 0.1, 2.0])
def test_smooth_closed_forms_against_quadrature(name, eps):
    f = Smooth(name)
    for x in (-1.3, 0.0, 0.4, 1.0, 3.0):
        ref = quad_mollify(lambda y: float(f.sample(y)), eps, x, points=[0.0, 1.0] if name == "indicator" else None)
        assert float(f.mollified(eps, x)) == pytest.approx(ref, abs=1e-10)


def test_power_tail_quadrature_mollify():
    f = Smooth("power_tail", beta=-0.5)
    for eps in (0.01, 0.5):
        for x in (-2.0, 0.0, 0.7, 5.0):
            ref = quad_mollify(lambda y: float(f.sample(y)), eps, x, points=[0.0])
            assert float(f.mollified(eps, x)) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("eps", [1e-3, 0.1])
def test_principal_value_mollification(eps):
    # G_eps p.v.(1/x)(x) = int_0^inf (g(x - y) - g(x + y)) / y dy
    for x in (-0.2, 0.0, 0.05, 1.0):
        ref, _ = integrate.quad(lambda y: (g(eps, x - y) - g(eps, x + y)) / y, 0, abs(x) + 20 * math.sqrt(eps),
                                limit=400, epsabs=1e-12)
        assert float(PrincipalValue().mollified(eps, x)) == pytest.approx(ref, abs=1e-8 / math.sqrt(eps))


@pytest.mark.parametrize("alpha", [-0.5, -0.25, -0.8])
def test_power_law_mollification(alpha):
    eps = 0.01
    s = math.sqrt(eps)
    # x = 40 s takes the asymptotic branch
    for x in (-0.3, 0.0, 0.05, 1.0, 40 * s):
        hi = max(x, 0) + 14 * s
        ref, _ = integrate.quad(lambda y: g(eps, x - y), 0, hi, weight="alg", wvar=(alpha, 0), limit=200)
        assert float(PowerLawPlus(alpha).mollified(eps, x)) == pytest.approx(ref, rel=1e-7, abs=1e-12)
        assert float(PowerLawMinus(alpha).mollified(eps, -x)) == pytest.approx(ref, rel=1e-7, abs=1e-12)


def test_spectra_against_quadrature():
    for xi in (0.3, 1.0, 2.5):
        re, _ = integrate.quad(lambda x: g(1.0, x) * math.cos(x * xi), -40, 40)
        assert Smooth("gaussian").spectrum(xi) == pytest.approx(re, abs=1e-12)
        re, _ = integrate.quad(lambda x: math.cos(x * xi), 0, 1)
        im, _ = integrate.quad(lambda x: -math.sin(x * xi), 0, 1)
        assert Smooth("indicator").spectrum(xi) == pytest.approx(re + 1j * im, abs=1e-12)
        # odd function: the transform is -i int f(x) sin(x xi) dx
        s, _ = integrate.quad(lambda x: x / (1 + x * x), 0, np.inf, weight="sin", wvar=xi)
        assert Smooth("odd_rational").spectrum(xi) == pytest.approx(-2j * s, abs=1e-8)
    assert Smooth("indicator").spectrum(0.0) == pytest.approx(1.0)
    assert Smooth.constant(2.0).spectrum(1.0) is None


def test_validation():
    with pytest.raises(ValueError):
        Smooth("nope")
    with pytest.raises(ValueError):
        Smooth("power_tail", beta=0.5)
    with pytest.raises(ValueError):
        PowerLaw(-1.0)
    with pytest.raises(ValueError):
        PowerLaw(-0.5, side=0)
    with pytest.raises(ValueError):
        BesovIndex(0.0, 0.5)
    with pytest.raises(ValueError):
        DiracAt().mollify(0.0)
    with pytest.raises(ValueError):
        drift_from_dict({"type": "mystery"})
    with pytest.raises(TypeError):
        drift_from_dict({"type": "dirac", "mass": 1.0})


def test_homes_are_critical_indices():
    assert DiracAt().home(2.0) == BesovIndex(-0.5, 2.0)
    assert PrincipalValue().home(math.inf) == BesovIndex(-1.0, math.inf)
    assert PowerLawPlus(-0.5).home(4.0) == BesovIndex(-0.25, 4.0)
    assert FiniteMeasure(((0.0, 1.0),)).home() == BesovIndex(0.0, 1.0)
    combo = LinearCombination((Smooth("gaussian"), DiracAt()))
    assert combo.home(2.0).gamma == -0.5


drift_dicts = st.one_of(
    st.builds(lambda w, a: {"type": "dirac", "weight": w, "location": a}, st.floats(-3, 3), st.floats(-1, 1)),
    st.builds(lambda w: {"type": "principal_value", "weight": w}, st.floats(-3, 3)),
    st.builds(lambda a, s: {"type": "power_law", "alpha": a, "weight": 1.0, "side": s},
              st.floats(-0.9, -0.1), st.sampled_from([1, -1])),
    st.builds(lambda n, amp, sc: {"type": "smooth", "name": n, "amplitude": amp, "scale": sc},
              st.sampled_from(["indicator", "odd_rational", "gaussian", "constant"]), st.floats(-2, 2), st.floats(0.1, 4)),
)


@settings(max_examples=40, deadline=None)
@given(parts=st.lists(drift_dicts, max_size=3))
def test_dict_roundtrip(parts):
    d = {"type": "sum", "children": parts}
    assert drift_from_dict(d).to_dict() == d
    for p in parts:
        assert drift_from_dict(p).to_dict() == p


def test_mixture_evaluation_and_table():
    m = DiracAt(1.5).mollify(0.01)
    u = np.linspace(-1, 1, 11)
    vals, outside = mollified_eval(m, u)
    np.testing.assert_array_equal(vals, DiracAt(1.5).mollified(0.01, u))
    assert outside == 0
    s = Smooth("odd_rational").mollify(0.01, table_range=4.0)
    vals, outside = mollified_eval(s, np.array([-5.0, 0.3, 6.0]))
    assert outside == 2
    assert vals[1] == pytest.approx(float(s(0.3)), abs=4 * s.interpolation_error + 1e-15)
    assert s.interpolation_error <= 1e-5


@pytest.mark.parametrize("drift", [DiracAt(2.0), PrincipalValue(-1.0), FiniteMeasure(((0, 1), (0.2, -0.5)))])
def test_lipschitz_bounds_dominate(drift):
    eps = 0.02
    x = np.linspace(-1, 1, 200001)
    slope = np.max(np.abs(np.diff(drift.mollified(eps, x)))) / (x[1] - x[0])
    lip = drift.mollify(eps).lipschitz()
    assert slope <= lip * (1 + 1e-6)
    if not isinstance(drift, FiniteMeasure):
        assert slope == pytest.approx(lip, rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.1, 50), eps=st.floats(1e-3, 1.0), x=st.floats(-3, 3),
       name=st.sampled_from(["indicator", "odd_rational", "gaussian"]), rho=st.sampled_from([1.0, 1.25]))
def test_scaling_covariance(lam, eps, x, name, rho):
    # G_eps f_lam(x) = lam^{3/2 - rho} (G_{lam eps} f)(lam^{1/2} x)
    f = Smooth(name)
    lhs = float(scaled_drift(f, lam, rho).mollified(eps, x))
    rhs = lam ** (1.5 - rho) * float(f.mollified(lam * eps, math.sqrt(lam) * x))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_scaling_forms_and_fixed_points():
    f = Smooth("indicator")
    assert scaled_drift(f, 3.0, lemma_form=True) == scaled_drift(f, 9.0)
    assert scaled_drift(DiracAt(), 7.0) == DiracAt()
    assert scaled_drift(PrincipalValue(2.0), 7.0) == PrincipalValue(2.0)
    with pytest.raises(ValueError):
        scaled_drift(DiracAt(), 2.0, rho=1.25)
    with pytest.raises(ValueError):
        scaled_drift(f, 2.0, rho=1.5)
    with pytest.raises(ValueError):
        scaled_drift(f, 0.0)


def test_scaling_constants_and_targets():
    c = scaling_constants(Smooth("odd_rational"))
    assert c["c"] == pytest.approx(1.0, abs=1e-6) and c["c0"] == 0.0 and c["stable"]
    assert scaling_limit_target(Smooth("odd_rational")).children == (PrincipalValue(c["c"]),)
    assert scaling_limit_target(Smooth("indicator")).children == (DiracAt(1.0, 0.0),)
    # (1 + |x|)^{-1/2} |x|^{1/2} -> 1 on both sides
    cp = scaling_constants(Smooth("power_tail", beta=-0.5), rho=1.25)
    assert cp["c_plus"] == pytest.approx(1.0, abs=1e-3) and cp["c_minus"] == pytest.approx(1.0, abs=1e-3)
    t = scaling_limit_target(Smooth("power_tail", beta=-0.5), rho=1.25)
    assert [type(p) for p in t.children] == [PowerLaw, PowerLaw]
    assert {p.side for p in t.children} == {1, -1} and all(p.alpha == -0.5 for p in t.children)


def test_scaled_odd_rational_approaches_principal_value():
    eps = 0.01
    x = np.linspace(-2, 2, 41)
    target = PrincipalValue().mollified(eps, x)
    errs = [np.max(np.abs(scaled_drift(Smooth("odd_rational"), lam).mollified(eps, x) - target))
            for lam in (1e2, 1e4, 1e6)]
    assert errs[0] > errs[1] > errs[2]
