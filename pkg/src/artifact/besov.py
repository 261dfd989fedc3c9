"""Littlewood-Paley blocks and Besov norms B^gamma_{p,infty} on an analysis torus.

Functions live on [-L, L) with 2^m samples. A SpectralFunction stores the
continuous Fourier transform c_k = int f(x) e^{-i x xi_k} dx at xi_k = pi k / L,
so f(x) = (1/2L) sum_k c_k e^{i x xi_k}. Each dyadic block is evaluated on its
own oversampled grid, which makes the L_2 and L_4 integrals exact for the
band-limited block.

Distributions with power-law tails (principal value, one-sided powers)
cannot be periodized, so their low block j = -1 is computed on the line by
quadrature of the Fourier integral over a window, plus the analytic
contribution of the power tail beyond it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.integrate import quad

from .drifts import (
    BesovIndex,
    DiracAt,
    DriftSpec,
    FiniteMeasure,
    LinearCombination,
    PowerLaw,
    PrincipalValue,
    Smooth,
)

LOW_EDGE = 4.0 / 3.0  # varsigma = 1 on |xi| <= 4/3
LOW_SUPPORT = 16.0 / 9.0  # varsigma = 0 on |xi| >= 16/9
BLOCK_SUPPORT = (4.0 / 3.0, 32.0 / 9.0)  # annulus of varpi


def _psi(x):
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, np.exp(-1.0 / safe), 0.0)


def rho_cutoff(r):
    """C-infinity cutoff: 1 on [0, 1], 0 on [4/3, inf)."""
    r = np.abs(np.asarray(r, dtype=float))
    a = _psi(4.0 / 3.0 - r)
    b = _psi(r - 1.0)
    return a / (a + b)


def varsigma(xi):
    return rho_cutoff(0.75 * np.abs(np.asarray(xi, dtype=float)))


def varpi(xi):
    xi = np.asarray(xi, dtype=float)
    return varsigma(0.5 * xi) - varsigma(xi)


def block_multiplier(j: int, xi):
    if j == -1:
        return varsigma(xi)
    return varpi(np.asarray(xi, dtype=float) * 2.0**-j)


@dataclass(frozen=True)
class Tail:
    """Asymptotic amplitude * |x|^power of the low block as x -> side * inf."""

    side: int
    amplitude: float
    power: float


@dataclass(frozen=True)
class SpectralFunction:
    """A (generalized) function on the analysis torus, by its Fourier coefficients.

    ``fourier`` is the exact transform on the line when known. ``singular``
    marks inputs whose low block must be computed on the line; ``low_power``
    is a with |f^(xi)| ~ |xi|^{-a} at 0, and ``tails`` the power asymptotics.
    """

    half_width: float
    coeffs: np.ndarray = field(repr=False)
    fourier: Callable | None = field(default=None, repr=False)
    singular: bool = False
    low_power: float = 0.0
    tails: tuple = ()

    def __post_init__(self):
        n = self.coeffs.size
        if n & (n - 1) or n < 16:
            raise ValueError("sample count must be a power of two")
        if self.singular and self.fourier is None:
            raise ValueError("singular inputs need their Fourier transform")

    # -------------------------------------------------------- construction
    @property
    def n(self) -> int:
        return self.coeffs.size

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def nyquist(self) -> float:
        return math.pi * (self.n // 2) / self.half_width

    @staticmethod
    def frequencies(n: int, half_width: float) -> np.ndarray:
        return math.pi / half_width * sfft.fftfreq(n, 1.0 / n)

    @property
    def xi(self) -> np.ndarray:
        return self.frequencies(self.n, self.half_width)

    def nodes(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n)

    @classmethod
    def from_samples(cls, values, half_width: float = 16.0) -> "SpectralFunction":
        v = np.asarray(values, dtype=float)
        h = 2.0 * half_width / v.size
        sign = 1.0 - 2.0 * (np.arange(v.size) % 2)
        return cls(half_width, h * sign * sfft.fft(v))

    @classmethod
    def from_fourier(cls, ft: Callable, half_width: float = 16.0, m: int = 16, singular: bool = False,
                     low_power: float = 0.0, tails: Sequence[Tail] = ()) -> "SpectralFunction":
        n = 1 << m
        xi = cls.frequencies(n, half_width)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.asarray(ft(xi), dtype=complex) * np.ones(n)
        if singular or not np.isfinite(c[0]):
            c[0] = 0.0
        return cls(half_width, c, ft, singular, low_power, tuple(tails))

    @classmethod
    def constant(cls, c: float, half_width: float = 16.0, m: int = 16) -> "SpectralFunction":
        coeffs = np.zeros(1 << m, dtype=complex)
        coeffs[0] = 2.0 * half_width * c
        return cls(half_width, coeffs)

    @classmethod
    def dirac(cls, weight: float = 1.0, location: float = 0.0, **kw) -> "SpectralFunction":
        return cls.from_drift(DiracAt(weight, location), **kw)

    @classmethod
    def principal_value(cls, weight: float = 1.0, **kw) -> "SpectralFunction":
        return cls.from_drift(PrincipalValue(weight), **kw)

    @classmethod
    def power_law(cls, alpha: float, weight: float = 1.0, side: int = 1, **kw) -> "SpectralFunction":
        return cls.from_drift(PowerLaw(alpha, weight, side), **kw)

    @classmethod
    def from_drift(cls, d: DriftSpec, half_width: float = 16.0, m: int = 16) -> "SpectralFunction":
        if isinstance(d, Smooth) and d.name == "constant":
            return cls.constant(d.amplitude, half_width, m)
        if d.spectrum(np.zeros(1)) is None:
            raise ValueError(f"{d.kind} drift has no Fourier transform; use from_samples")
        singular, low, tails = _asymptotics(d)
        return cls.from_fourier(d.spectrum, half_width, m, singular, low, tails)

    # -------------------------------------------------------- algebra
    def _combine(self, other: "SpectralFunction", sign: float) -> "SpectralFunction":
        if other.n != self.n or other.half_width != self.half_width:
            raise ValueError("spectral functions live on different analysis grids")
        fa, fb = self.fourier, other.fourier
        ft = None if fa is None or fb is None else (lambda xi: fa(xi) + sign * fb(xi))
        tails = self.tails + tuple(Tail(t.side, sign * t.amplitude, t.power) for t in other.tails)
        singular = self.singular or other.singular
        if singular and ft is None:
            raise ValueError("singular combination needs both Fourier transforms")
        return SpectralFunction(self.half_width, self.coeffs + sign * other.coeffs, ft, singular,
                                max(self.low_power, other.low_power), tails)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, a: float):
        ft = None if self.fourier is None else (lambda xi, f=self.fourier: a * f(xi))
        return replace(self, coeffs=a * self.coeffs, fourier=ft,
                       tails=tuple(Tail(t.side, a * t.amplitude, t.power) for t in self.tails))

    __rmul__ = __mul__

    def multiply(self, mult: Callable) -> "SpectralFunction":
        """Apply a Fourier multiplier that equals 1 at xi = 0 to leading order."""
        ft = None if self.fourier is None else (lambda xi, f=self.fourier: mult(xi) * f(xi))
        return replace(self, coeffs=self.coeffs * mult(self.xi), fourier=ft)

    def translate(self, a: float) -> "SpectralFunction":
        """x -> f(a + x)."""
        return self.multiply(lambda xi: np.exp(1j * a * np.asarray(xi, dtype=float)))

    def values(self) -> np.ndarray:
        sign = 1.0 - 2.0 * (np.arange(self.n) % 2)
        return np.real(sfft.ifft(sign * self.coeffs)) / self.spacing


# ---------------------------------------------------------------- catalog asymptotics


def _asymptotics(d: DriftSpec):
    """(singular, low_power, tails) for the catalog entries."""
    if isinstance(d, PrincipalValue):
        return True, 0.0, (Tail(1, d.weight, -1.0), Tail(-1, -d.weight, -1.0))
    if isinstance(d, PowerLaw):
        return True, d.alpha + 1.0, (Tail(d.side, d.weight, d.alpha),)
    if isinstance(d, Smooth) and d.name == "odd_rational":
        c = d.amplitude / d.scale
        return True, 0.0, (Tail(1, c, -1.0), Tail(-1, -c, -1.0))
    if isinstance(d, LinearCombination):
        sing, low, tails = False, 0.0, ()
        for ch in d.children:
            s, lo, t = _asymptotics(ch)
            sing, low, tails = sing or s, max(low, lo), tails + tuple(t)
        return sing, low, tails
    if isinstance(d, (DiracAt, FiniteMeasure, Smooth)):
        return False, 0.0, ()
    raise ValueError(f"no asymptotics known for {d.kind}")


# ---------------------------------------------------------------- blocks


def block_count(f: SpectralFunction) -> int:
    """Index of the last block with any support below the grid Nyquist frequency."""
    j = -1
    while 2.0 ** (j + 1) * BLOCK_SUPPORT[0] < f.nyquist:
        j += 1
    return j


def j_max(f: SpectralFunction) -> int:
    """Last block whose whole annulus lies below the Nyquist frequency."""
    j = -1
    while 2.0 ** (j + 1) * BLOCK_SUPPORT[1] <= f.nyquist:
        j += 1
    return j


def dyadic_block(f: SpectralFunction, j: int) -> SpectralFunction:
    """Delta_j f as a spectral function on the same grid."""
    if j < -1:
        raise ValueError("blocks start at j = -1")
    if j > block_count(f):
        warnings.warn(f"block {j} lies beyond the grid Nyquist frequency; it is zero", stacklevel=2)
        return replace(f, coeffs=np.zeros_like(f.coeffs), fourier=None, singular=False, tails=())
    mult = lambda xi, j=j: block_multiplier(j, xi)
    out = replace(f, coeffs=f.coeffs * mult(f.xi))
    if f.fourier is not None:
        out = replace(out, fourier=lambda xi, g=f.fourier: mult(xi) * g(xi))
    if j >= 0:
        out = replace(out, singular=False, tails=())
    return out


def _block_band(j: int) -> float:
    return LOW_SUPPORT if j == -1 else 2.0**j * BLOCK_SUPPORT[1]


def _oversampled(f: SpectralFunction, j: int, factor: int = 8) -> np.ndarray:
    """Samples of the (periodized) block on a grid with >= factor points per band wave."""
    kmax = min(int(math.ceil(_block_band(j) * f.half_width / math.pi)), f.n // 2)
    size = 1 << max(4, int(math.ceil(math.log2(factor * kmax + 1))))
    k = np.arange(-kmax, kmax + 1)
    xi = math.pi * k / f.half_width
    src = f.coeffs[k % f.n] * block_multiplier(j, xi)
    if kmax == f.n // 2:
        src[0] = src[-1] = 0.5 * (src[0] + src[-1])
    buf = np.zeros(size, dtype=complex)
    buf[k % size] = src * (1.0 - 2.0 * (k % 2))
    return np.real(sfft.ifft(buf)) * size / (2.0 * f.half_width)


def _lp_grid(vals: np.ndarray, p: float, h: float) -> float:
    a = np.abs(vals)
    if math.isinf(p):
        return float(a.max())
    return float((h * np.sum(a**p)) ** (1.0 / p))


def _tail_integral(tails, side: int, start: float, p: float) -> float:
    terms = [t for t in tails if t.side == side]
    if not terms:
        return 0.0
    if len(terms) == 1:
        t = terms[0]
        if abs(t.amplitude) == 0:
            return 0.0
        q = t.power * p + 1.0
        if q >= 0:
            return math.inf
        return abs(t.amplitude) ** p * start**q / -q
    g = lambda x: abs(sum(t.amplitude * x**t.power for t in terms)) ** p
    return quad(g, start, np.inf, limit=200)[0]


def low_block_samples(f: SpectralFunction, window: float = 512.0, spacing: float = 0.125,
                      panels: int = 256, order: int = 16):
    """Delta_{-1} f(x) on [-window, window] from its Fourier integral on the line.

    Integrates (1/pi) Re int_0^{16/9} varsigma(xi) f^(xi) e^{i x xi} dxi after
    the substitution xi = s^q, q = 1/(1 - low_power), which removes the
    integrable singularity of f^ at 0.
    """
    q = 1.0 / (1.0 - f.low_power)
    smax = LOW_SUPPORT ** (1.0 / q)
    gs, gw = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, smax, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    s = (mid + half * gs).ravel()
    w = (half * gw).ravel()
    xi = s**q
    weight = w * q * s ** (q - 1.0) * varsigma(xi)
    with np.errstate(divide="ignore", invalid="ignore"):
        amp = np.asarray(f.fourier(xi), dtype=complex) * weight
    amp = np.where(np.isfinite(amp), amp, 0.0)
    x = np.arange(-window, window + 0.5 * spacing, spacing)
    out = np.empty(x.size)
    step = max(1, (1 << 22) // xi.size)
    for i in range(0, x.size, step):
        ph = np.outer(x[i:i + step], xi)
        out[i:i + step] = (np.cos(ph) @ amp.real - np.sin(ph) @ amp.imag) / math.pi
    return x, out


def block_lp_norm(f: SpectralFunction, j: int, p: float, window: float = 512.0) -> float:
    """||Delta_j f||_{L_p}, on the line for the low block of singular inputs."""
    if j > block_count(f):
        return 0.0
    if j == -1 and f.singular:
        x, v = low_block_samples(f, window)
        h = x[1] - x[0]
        if math.isinf(p):
            far = max((abs(t.amplitude) * window**t.power for t in f.tails), default=0.0)
            return max(float(np.abs(v).max()), far)
        inner = h * (np.sum(np.abs(v) ** p) - 0.5 * (abs(v[0]) ** p + abs(v[-1]) ** p))
        total = inner + _tail_integral(f.tails, 1, window, p) + _tail_integral(f.tails, -1, window, p)
        return float(total ** (1.0 / p))
    vals = _oversampled(f, j)
    return _lp_grid(vals, p, 2.0 * f.half_width / vals.size)


@dataclass
class BesovReport:
    index: BesovIndex
    norm: float
    table: list  # rows (j, blocknorm, weighted, complete)
    j_max: int

    def weighted(self, j_from: int = 2, complete: bool = True) -> np.ndarray:
        return np.array([r[2] for r in self.table if r[0] >= j_from and (r[3] or not complete)])

    def rows(self):
        return [{"j": r[0], "blocknorm": r[1], "weighted": r[2], "complete": r[3]} for r in self.table]


def besov_norm(f: SpectralFunction, idx: BesovIndex, window: float = 512.0) -> BesovReport:
    """sup_j 2^{j gamma} ||Delta_j f||_{L_p} over the blocks the grid resolves."""
    top = block_count(f)
    jm = j_max(f)
    table = []
    for j in range(-1, top + 1):
        b = block_lp_norm(f, j, idx.p, window)
        table.append((j, b, 2.0 ** (j * idx.gamma) * b, j <= jm))
    return BesovReport(idx, max(r[2] for r in table), table, jm)


def plateau(report: BesovReport, j_from: int = 2, tol: float = 1.2) -> dict:
    """Membership verdict: weighted block values flat within ``tol`` (max/min) for j >= j_from."""
    w = report.weighted(j_from)
    ratio = float(w.max() / w.min()) if w.min() > 0 else math.inf
    return {"ratio": ratio, "plateau": bool(ratio <= tol)}


def growth(report: BesovReport, j_from: int = 2, min_rate: float = 0.2) -> dict:
    """Non-membership verdict: fitted log2 growth of the weighted values per block."""
    js = np.array([r[0] for r in report.table if r[0] >= j_from and r[3]], dtype=float)
    w = report.weighted(j_from)
    rate = float(np.polyfit(js, np.log2(w), 1)[0])
    return {"rate": rate, "growth": bool(rate >= min_rate)}


# ---------------------------------------------------------------- operators


def mollify(f: SpectralFunction, eps: float) -> SpectralFunction:
    """G_eps f: heat multiplier e^{-eps xi^2 / 2}."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return f.multiply(lambda xi: np.exp(-0.5 * eps * np.asarray(xi, dtype=float) ** 2))


def lp_norm(f: SpectralFunction, p: float, oversample: int = 1) -> float:
    """||f||_{L_p} over the torus from grid samples (for regular f)."""
    if f.singular:
        raise ValueError("L_p norm of a singular input is not defined on the torus")
    size = f.n * oversample
    buf = np.zeros(size, dtype=complex)
    k = np.rint(f.xi * f.half_width / math.pi).astype(int)
    buf[k % size] = f.coeffs * (1.0 - 2.0 * (k % 2))
    vals = np.real(sfft.ifft(buf)) * size / (2.0 * f.half_width)
    return _lp_grid(vals, p, 2.0 * f.half_width / size)


def smoothing_ratios(f: SpectralFunction, idx: BesovIndex, eps_list) -> dict:
    """||G_eps f||_{L_p} eps^{-gamma/2} / ||f||_{B^gamma_p} for each eps (bounded by the smoothing lemma)."""
    norm = besov_norm(f, idx).norm
    ratios = [lp_norm(mollify(f, e), idx.p) * e ** (-idx.gamma / 2.0) / norm for e in eps_list]
    return {"eps": list(map(float, eps_list)), "ratios": ratios, "besov_norm": norm}


@dataclass
class ConvergenceReport:
    norms: list
    bounded: bool
    probes: list
    distances: dict
    decreasing: dict
    contraction: dict


def bminus_convergence(f_seq: Sequence[SpectralFunction], f: SpectralFunction, idx: BesovIndex,
                       probes: Sequence[float], strict: bool = False) -> ConvergenceReport:
    """B^{gamma-} diagnostics: bounded norms at ``idx`` and distances at each probe gamma' < gamma."""
    if not probes:
        raise ValueError("at least one probe index is required")
    if any(g >= idx.gamma for g in probes):
        raise ValueError("probes must lie strictly below the index")
    norms = [besov_norm(fn, idx).norm for fn in f_seq]
    half = max(1, len(norms) // 2)
    bounded = bool(np.all(np.isfinite(norms)) and max(norms[half:]) <= 1.25 * max(norms[:half]))
    dist, dec, contr = {}, {}, {}
    for g in probes:
        d = [besov_norm(fn - f, BesovIndex(g, idx.p)).norm for fn in f_seq]
        dist[g] = d
        steps = np.diff(d)
        dec[g] = bool(np.all(steps < 0) if strict else np.all(steps <= 0))
        contr[g] = float(d[0] / d[-1]) if d[-1] > 0 else (math.inf if d[0] > 0 else 1.0)
    return ConvergenceReport(norms, bounded, list(probes), dist, dec, contr)


@dataclass
class TranslationReport:
    invariance_error: float
    first_constant: float
    second_constant: float
    first_table: list
    second_table: list


def _ratio(d: float, scale: float) -> float:
    # a zero shift has no rate; report 0 when the difference vanishes too
    if scale == 0.0:
        return 0.0 if d == 0.0 else math.inf
    return d / scale


def translation_bounds_check(f: SpectralFunction, idx: BesovIndex, shifts: Sequence[float],
                             alpha: float = 1.0, alpha2: float = 1.0) -> TranslationReport:
    """Empirical constants of the translation estimates.

    Invariance: ||f(a + .)|| = ||f||. First difference:
    ||f(a + .) - f|| <= C |a|^alpha ||f||_{B^{gamma+alpha}}. Second difference:
    ||f(a1+.) - f(a2+.) - f(a3+.) + f(a3+a2-a1+.)|| <= C |a1-a2|^a1 |a1-a3|^a2 ||f||_{B^{gamma+a1+a2}},
    taken here with a1 = 0, a2 = a, a3 = -a.
    """
    base = besov_norm(f, idx).norm
    inv = max(abs(besov_norm(f.translate(a), idx).norm - base) for a in shifts) / base if base > 0 else 0.0
    up1 = besov_norm(f, BesovIndex(idx.gamma + alpha, idx.p)).norm
    up2 = besov_norm(f, BesovIndex(idx.gamma + alpha + alpha2, idx.p)).norm
    first, second = [], []
    for a in shifts:
        d1 = besov_norm(f.translate(a) - f, idx).norm
        first.append((a, d1, _ratio(d1, abs(a) ** alpha * up1)))
        d2 = besov_norm(f - f.translate(a) - f.translate(-a) + f, idx).norm
        second.append((a, d2, _ratio(d2, abs(a) ** (alpha + alpha2) * up2)))
    return TranslationReport(float(inv), max(r[2] for r in first), max(r[2] for r in second), first, second)
