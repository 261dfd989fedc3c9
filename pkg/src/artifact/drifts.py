"""Catalog of drifts b, their heat mollifications G_eps b and scaling families.

Every variant knows its Fourier transform (used by the Besov module), its
critical Besov index, and how to evaluate G_eps b. Closed forms are used
where they exist; everything else goes through a uniform lookup table that
the solver kernels interpolate linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class BesovIndex:
    gamma: float
    p: float

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError("integrability p must be at least 1")

    def shifted(self, dgamma: float) -> "BesovIndex":
        return BesovIndex(self.gamma + dgamma, self.p)


def _g(eps, z):
    return np.exp(-0.5 * z * z / eps) / np.sqrt(2.0 * np.pi * eps)


# ---------------------------------------------------------------- smooth bases


def _indicator(x):
    x = np.asarray(x, dtype=float)
    return ((x >= 0.0) & (x <= 1.0)).astype(float)


def _indicator_moll(eps, x):
    s = math.sqrt(eps)
    return special.ndtr(x / s) - special.ndtr((x - 1.0) / s)


def _indicator_ft(xi):
    xi = np.asarray(xi, dtype=float)
    small = np.abs(xi) < 1e-8
    safe = np.where(small, 1.0, xi)
    return np.where(small, 1.0 - 0.5j * xi, (1.0 - np.exp(-1j * safe)) / (1j * safe))


def _odd_rational(x):
    x = np.asarray(x, dtype=float)
    return x / (1.0 + x * x)


def _odd_rational_moll(eps, x):
    # Re of the Gaussian average of 1/(x - y + i), via the Faddeeva function
    z = (np.asarray(x, dtype=float) + 1j) / math.sqrt(2.0 * eps)
    return math.sqrt(math.pi / (2.0 * eps)) * special.wofz(z).imag


def _odd_rational_ft(xi):
    xi = np.asarray(xi, dtype=float)
    return -1j * np.pi * np.sign(xi) * np.exp(-np.abs(xi))


def _gaussian(x):
    return _g(1.0, np.asarray(x, dtype=float))


def _gaussian_moll(eps, x):
    return _g(1.0 + eps, np.asarray(x, dtype=float))


def _gaussian_ft(xi):
    return np.exp(-0.5 * np.asarray(xi, dtype=float) ** 2) + 0j


def _constant(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _constant_moll(eps, x):
    return np.ones_like(np.asarray(x, dtype=float))


# name -> (function, closed-form mollification or None, Fourier transform or None, integral)
SMOOTH_BASES: dict[str, tuple] = {
    "indicator": (_indicator, _indicator_moll, _indicator_ft, 1.0),
    "odd_rational": (_odd_rational, _odd_rational_moll, _odd_rational_ft, 0.0),
    "gaussian": (_gaussian, _gaussian_moll, _gaussian_ft, 1.0),
    "constant": (_constant, _constant_moll, None, math.inf),
}


def _power_tail(beta: float):
    return lambda x: (1.0 + np.abs(np.asarray(x, dtype=float))) ** beta


def _quadrature_mollify(f: Callable, eps: float, x: np.ndarray, nodes: int = 160) -> np.ndarray:
    """G_eps f(x) = E f(x + sqrt(eps) Z) for f smooth away from a kink at 0.

    The Z range [-12, 12] is split at the kink -x / sqrt(eps) and each side
    gets its own Gauss-Legendre rule, so accuracy does not drop to second order.
    """
    t, w = np.polynomial.legendre.leggauss(nodes)
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    s = math.sqrt(eps)
    out = np.empty(flat.size)
    for start in range(0, flat.size, 512):
        sl = flat[start:start + 512, None]
        k = np.clip(-sl / s, -12.0, 12.0)
        acc = np.zeros(sl.shape[0])
        for lo, hi in ((-12.0, k), (k, 12.0)):
            half = 0.5 * (hi - lo)
            z = lo + half * (t[None, :] + 1.0)
            acc += (half * f(sl + s * z) * np.exp(-0.5 * z * z)) @ w
        out[start:start + 512] = acc / SQRT2PI
    return out.reshape(x.shape)


# ---------------------------------------------------------------- power laws


def power_plus_mollified(alpha: float, eps: float, x) -> np.ndarray:
    """G_eps of x^alpha 1(x > 0) through the parabolic cylinder function D_{-alpha-1}."""
    x = np.asarray(x, dtype=float)
    z = -x / math.sqrt(eps)
    out = np.empty_like(x)
    near = z > -35.0
    v = -alpha - 1.0
    if np.any(near):
        d, _ = special.pbdv(v, z[near])
        out[near] = (
            special.gamma(alpha + 1.0) * eps ** ((alpha + 1.0) / 2.0)
            * np.exp(-x[near] ** 2 / (4.0 * eps)) * d / math.sqrt(2.0 * math.pi * eps)
        )
    far = ~near
    if np.any(far):
        # heat expansion sum_n (eps/2)^n / n! d^{2n} x^alpha, asymptotic for x >> sqrt(eps)
        xf = x[far]
        term = xf**alpha
        acc = term.copy()
        coef = 1.0
        for n in range(1, 6):
            coef *= (alpha - 2 * n + 2) * (alpha - 2 * n + 1)
            acc += coef * (eps / 2.0) ** n / math.factorial(n) * xf ** (alpha - 2 * n)
        out[far] = acc
    return out


def power_plus_ft(alpha: float, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    a = np.abs(xi)
    safe = np.where(a == 0, 1.0, a)
    val = special.gamma(alpha + 1.0) * safe ** (-alpha - 1.0) * np.exp(-0.5j * np.pi * (alpha + 1.0) * np.sign(xi))
    return np.where(a == 0, 0.0, val)


def principal_value_mollified(eps: float, x) -> np.ndarray:
    """G_eps of p.v. 1/x, equal to sqrt(2/eps) F(x / sqrt(2 eps)) with F the Dawson function."""
    x = np.asarray(x, dtype=float)
    return math.sqrt(2.0 / eps) * special.dawsn(x / math.sqrt(2.0 * eps))


# ---------------------------------------------------------------- specs


class DriftSpec:
    """Base class of the drift catalog."""

    kind = "drift"

    def spectrum(self, xi):
        """Fourier transform int b(x) e^{-i x xi} dx, or None if only sampled."""
        return None

    def sample(self, x):
        raise NotImplementedError(f"{self.kind} has no pointwise values")

    def home(self, p: float = math.inf) -> BesovIndex:
        raise NotImplementedError

    def mollified(self, eps: float, x) -> np.ndarray:
        raise NotImplementedError

    def mollify(self, eps: float, **kw) -> "MollifiedDrift":
        return MollifiedDrift(self, eps, **kw)

    def atoms(self):
        """Gaussian-mixture form (locations, weights, constant) if G_eps b is one, else None."""
        return None

    def lipschitz(self, eps: float) -> float | None:
        """Closed-form bound on |d/du G_eps b|, or None to use the tabulated estimate."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Smooth(DriftSpec):
    """x -> amplitude * base(scale * x) for a named bounded base function.

    ``beta`` parametrizes the ``power_tail`` base (1 + |x|)^beta.
    """

    name: str
    amplitude: float = 1.0
    scale: float = 1.0
    beta: float | None = None
    kind = "smooth"

    def __post_init__(self):
        if self.name != "power_tail" and self.name not in SMOOTH_BASES:
            raise ValueError(f"unknown smooth base {self.name!r}")
        if self.name == "power_tail" and (self.beta is None or not -1.0 <= self.beta < 0.0):
            raise ValueError("power_tail needs beta in [-1, 0)")

    @classmethod
    def constant(cls, c: float) -> "Smooth":
        return cls("constant", float(c))

    def _base(self):
        if self.name == "power_tail":
            return _power_tail(self.beta), None, None, math.inf
        return SMOOTH_BASES[self.name]

    def sample(self, x):
        f = self._base()[0]
        return self.amplitude * f(self.scale * np.asarray(x, dtype=float))

    def spectrum(self, xi):
        ft = self._base()[2]
        if ft is None:
            return None
        return self.amplitude / self.scale * ft(np.asarray(xi, dtype=float) / self.scale)

    @property
    def integral(self) -> float:
        return self.amplitude / self.scale * self._base()[3]

    def home(self, p: float = math.inf) -> BesovIndex:
        return BesovIndex(0.0, p)

    def mollified(self, eps: float, x) -> np.ndarray:
        f, moll, _, _ = self._base()
        x = np.asarray(x, dtype=float)
        e = eps * self.scale**2
        if moll is not None:
            return self.amplitude * moll(e, self.scale * x)
        return self.amplitude * _quadrature_mollify(f, e, self.scale * x)

    def atoms(self):
        if self.name == "constant":
            return np.zeros(0), np.zeros(0), self.amplitude
        return None

    def lipschitz(self, eps: float) -> float | None:
        if self.name == "constant":
            return 0.0
        return None

    def to_dict(self) -> dict:
        out = {"type": "smooth", "name": self.name, "amplitude": self.amplitude, "scale": self.scale}
        if self.beta is not None:
            out["beta"] = self.beta
        return out


@dataclass(frozen=True)
class DiracAt(DriftSpec):
    weight: float = 1.0
    location: float = 0.0
    kind = "dirac"

    def spectrum(self, xi):
        return self.weight * np.exp(-1j * self.location * np.asarray(xi, dtype=float))

    def home(self, p: float = math.inf) -> BesovIndex:
        return BesovIndex(-1.0 + 1.0 / p, p)

    def mollified(self, eps, x):
        return self.weight * _g(eps, np.asarray(x, dtype=float) - self.location)

    def atoms(self):
        return np.array([self.location]), np.array([self.weight]), 0.0

    def lipschitz(self, eps):
        return abs(self.weight) * math.exp(-0.5) / (eps * SQRT2PI)

    def to_dict(self):
        return {"type": "dirac", "weight": self.weight, "location": self.location}


@dataclass(frozen=True)
class PrincipalValue(DriftSpec):
    weight: float = 1.0
    kind = "principal_value"

    def spectrum(self, xi):
        return -1j * np.pi * self.weight * np.sign(np.asarray(xi, dtype=float))

    def home(self, p: float = math.inf) -> BesovIndex:
        return BesovIndex(-1.0 + 1.0 / p, p)

    def mollified(self, eps, x):
        return self.weight * principal_value_mollified(eps, x)

    def lipschitz(self, eps):
        # |d/dz F| <= 1 for the Dawson function, attained at 0
        return abs(self.weight) / eps

    def to_dict(self):
        return {"type": "principal_value", "weight": self.weight}


@dataclass(frozen=True)
class PowerLaw(DriftSpec):
    """weight * |x|^alpha on one side: x > 0 for side = +1, x < 0 for side = -1."""

    alpha: float
    weight: float = 1.0
    side: int = 1
    kind = "power_law"

    def __post_init__(self):
        if not -1.0 < self.alpha < 0.0:
            raise ValueError("power-law exponent must lie in (-1, 0)")
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")

    def spectrum(self, xi):
        return self.weight * power_plus_ft(self.alpha, self.side * np.asarray(xi, dtype=float))

    def sample(self, x):
        y = self.side * np.asarray(x, dtype=float)
        safe = np.where(y > 0, y, 1.0)
        return self.weight * np.where(y > 0, safe**self.alpha, 0.0)

    def home(self, p: float = math.inf) -> BesovIndex:
        return BesovIndex(self.alpha + 1.0 / p, p)

    def mollified(self, eps, x):
        return self.weight * power_plus_mollified(self.alpha, eps, self.side * np.asarray(x, dtype=float))

    def to_dict(self):
        return {"type": "power_law", "alpha": self.alpha, "weight": self.weight, "side": self.side}


def PowerLawPlus(alpha: float, weight: float = 1.0) -> PowerLaw:
    return PowerLaw(alpha, weight, 1)


def PowerLawMinus(alpha: float, weight: float = 1.0) -> PowerLaw:
    return PowerLaw(alpha, weight, -1)


@dataclass(frozen=True)
class FiniteMeasure(DriftSpec):
    """Finite sum of point masses, ((location, weight), ...)."""

    points: tuple = ()
    kind = "measure"

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((float(a), float(w)) for a, w in self.points))

    @property
    def nonnegative(self) -> bool:
        return all(w >= 0 for _, w in self.points)

    def spectrum(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape, dtype=complex)
        for a, w in self.points:
            out += w * np.exp(-1j * a * xi)
        return out

    def home(self, p: float = 1.0) -> BesovIndex:
        return BesovIndex(-1.0 + 1.0 / p, p)

    def mollified(self, eps, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for a, w in self.points:
            out += w * _g(eps, x - a)
        return out

    def atoms(self):
        loc = np.array([a for a, _ in self.points])
        wts = np.array([w for _, w in self.points])
        return loc, wts, 0.0

    def lipschitz(self, eps):
        return sum(abs(w) for _, w in self.points) * math.exp(-0.5) / (eps * SQRT2PI)

    def to_dict(self):
        return {"type": "measure", "points": [list(p) for p in self.points]}


@dataclass(frozen=True)
class LinearCombination(DriftSpec):
    """Sum of child drifts."""

    children: tuple = ()
    kind = "sum"

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))

    def spectrum(self, xi):
        parts = [c.spectrum(xi) for c in self.children]
        if any(p is None for p in parts):
            return None
        xi = np.asarray(xi, dtype=float)
        return sum(parts, np.zeros(xi.shape, dtype=complex))

    def sample(self, x):
        x = np.asarray(x, dtype=float)
        return sum((c.sample(x) for c in self.children), np.zeros(x.shape))

    def home(self, p: float = math.inf) -> BesovIndex:
        # the roughest child decides
        if not self.children:
            return BesovIndex(0.0, p)
        return min((c.home(p) for c in self.children), key=lambda b: b.gamma)

    def mollified(self, eps, x):
        x = np.asarray(x, dtype=float)
        return sum((c.mollified(eps, x) for c in self.children), np.zeros(x.shape))

    def atoms(self):
        parts = [c.atoms() for c in self.children]
        if any(p is None for p in parts):
            return None
        if not parts:
            return np.zeros(0), np.zeros(0), 0.0
        loc = np.concatenate([p[0] for p in parts])
        wts = np.concatenate([p[1] for p in parts])
        return loc, wts, float(sum(p[2] for p in parts))

    def lipschitz(self, eps):
        parts = [c.lipschitz(eps) for c in self.children]
        if any(p is None for p in parts):
            return None
        return float(sum(parts))

    def to_dict(self):
        return {"type": "sum", "children": [c.to_dict() for c in self.children]}


def drift_from_dict(d: dict) -> DriftSpec:
    """Inverse of ``to_dict``; raises on unknown tags or keys."""
    d = dict(d)
    tag = d.pop("type", None)
    if tag == "sum":
        return LinearCombination(tuple(drift_from_dict(c) for c in d.pop("children", [])))
    if tag == "measure":
        return FiniteMeasure(tuple(tuple(p) for p in d.pop("points", [])))
    table = {
        "smooth": Smooth,
        "dirac": DiracAt,
        "principal_value": PrincipalValue,
        "power_law": PowerLaw,
    }
    if tag not in table:
        raise ValueError(f"unknown drift type {tag!r}")
    return table[tag](**d)


# ---------------------------------------------------------------- mollified drift


@dataclass
class MollifiedDrift:
    """G_eps b, evaluable pointwise.

    Gaussian mixtures (Dirac, atoms, constants) are evaluated in closed form
    by the solver kernels. Other drifts are tabulated on [-R, R]; values
    outside are clamped to the end points and counted.
    """

    base: DriftSpec
    eps: float
    table_range: float = 8.0
    table_step: float | None = None
    _table: tuple | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("mollification level must be positive")

    def __call__(self, u):
        return self.base.mollified(self.eps, u)

    @property
    def mixture(self):
        return self.base.atoms()

    def table(self):
        """(x0, h, values) of the uniform lookup table, built once."""
        if self._table is None:
            h = self.table_step or min(math.sqrt(self.eps) / 32.0, self.table_range / 4096.0)
            n = int(math.ceil(2.0 * self.table_range / h)) + 1
            x = -self.table_range + h * np.arange(n)
            vals = np.ascontiguousarray(self(x), dtype=float)
            mid = self(x[:-1] + 0.5 * h)
            err = float(np.max(np.abs(mid - 0.5 * (vals[:-1] + vals[1:])))) if n > 1 else 0.0
            self._table = (-self.table_range, h, vals, err)
        return self._table[:3]

    @property
    def interpolation_error(self) -> float:
        self.table()
        return self._table[3]

    def lipschitz(self) -> float:
        lip = self.base.lipschitz(self.eps)
        if lip is not None:
            return lip
        _, h, vals = self.table()
        return float(np.max(np.abs(np.diff(vals))) / h)

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "eps": self.eps}


def mollified_eval(d: MollifiedDrift, u):
    """G_eps b at u: closed form where available, else table interpolation.

    Returns (values, number of points outside the table range).
    """
    u = np.asarray(u, dtype=float)
    if d.mixture is not None or isinstance(d.base, PrincipalValue):
        return d(u), 0
    x0, h, vals = d.table()
    hi = x0 + h * (vals.size - 1)
    outside = int(np.count_nonzero((u < x0) | (u > hi)))
    return np.interp(u, x0 + h * np.arange(vals.size), vals), outside


# ---------------------------------------------------------------- scaling


def scaled_drift(f: DriftSpec, lam: float, rho: float = 1.0, lemma_form: bool = False) -> DriftSpec:
    """The scaling family f_lam(x) = lam^{3/2 - rho} f(lam^{1/2} x).

    With ``lemma_form`` the spatial factor is lam itself, f_lam(x) =
    lam^{3 - 2 rho} f(lam x), which is the same family at scale lam^2.
    Dirac masses at 0 and principal values are fixed points for rho = 1.
    """
    if not 1.0 <= rho < 1.5:
        raise ValueError("rho must lie in [1, 3/2)")
    if not lam > 0:
        raise ValueError("scale must be positive")
    s = lam if lemma_form else math.sqrt(lam)
    amp = s ** (3.0 - 2.0 * rho)
    if isinstance(f, Smooth):
        return Smooth(f.name, f.amplitude * amp, f.scale * s, f.beta)
    if rho == 1.0 and isinstance(f, DiracAt) and f.location == 0.0:
        return f
    if rho == 1.0 and isinstance(f, PrincipalValue):
        return f
    raise ValueError("scaling family is only defined for smooth bases and homogeneous targets")


def scaling_constants(f: Smooth, rho: float = 1.0, far: float = 1e6) -> dict:
    """Constants of the limit: c and c0 for rho = 1, c_plus and c_minus otherwise.

    For rho = 1, c = lim x f(x) (odd tail) and c0 = int (f - c x/(1+x^2)) dx;
    for rho > 1, c_pm = lim f(x) |x|^{3 - 2 rho} as x -> +-inf.
    """
    if rho == 1.0:
        c = 0.5 * (far * f.sample(far) - far * f.sample(-far))
        if f.name in SMOOTH_BASES and math.isfinite(f.integral):
            c0 = f.integral
        else:
            from scipy.integrate import quad

            g = lambda x: float(f.sample(x) - c * x / (1 + x * x))
            c0 = quad(g, -np.inf, np.inf, limit=400)[0]
        c_near = 0.5 * (far / 10 * f.sample(far / 10) - far / 10 * f.sample(-far / 10))
        stable = abs(c - c_near) <= 1e-3 * max(1.0, abs(c))
        return {"c": float(c), "c0": float(c0), "stable": bool(stable)}
    e = 3.0 - 2.0 * rho
    cp = float(f.sample(far) * far**e)
    cm = float(f.sample(-far) * far**e)
    cp_near = float(f.sample(far / 10) * (far / 10) ** e)
    stable = abs(cp - cp_near) <= 1e-2 * max(1.0, abs(cp))
    return {"c_plus": cp, "c_minus": cm, "stable": bool(stable)}


def scaling_limit_target(f: Smooth, rho: float = 1.0, constants: dict | None = None, tol: float = 1e-12) -> LinearCombination:
    """Limit drift of the scaling family: c zeta^{-1} + c0 delta for rho = 1,
    c_- zeta_-^{2 rho - 3} + c_+ zeta_+^{2 rho - 3} otherwise."""
    if constants is None:
        constants = scaling_constants(f, rho)
        if not constants["stable"]:
            raise ValueError(f"limit constants did not stabilize: {constants}")
    parts = []
    if rho == 1.0:
        if abs(constants["c"]) > tol:
            parts.append(PrincipalValue(constants["c"]))
        if abs(constants["c0"]) > tol:
            parts.append(DiracAt(constants["c0"], 0.0))
    else:
        alpha = 2.0 * rho - 3.0
        if abs(constants["c_minus"]) > tol:
            parts.append(PowerLawMinus(alpha, constants["c_minus"]))
        if abs(constants["c_plus"]) > tol:
            parts.append(PowerLawPlus(alpha, constants["c_plus"]))
    return LinearCombination(tuple(parts))
