"""Monte-Carlo statistics: L_m norms with bootstrap errors, log-log exponent
fits, the time-Hoelder seminorm of the drift part, occupation functionals
and dyadic sewing sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .domain_kernels import DomainSpec, GridBasis
from .drifts import MollifiedDrift
from .noise_field import BOOTSTRAP_STREAM, SpaceTimeGrid, replica_generator
from .solver import Channel, EnsembleRunner, Observer, Occupation


class SaturationError(ValueError):
    """Mollification scale too coarse for the smallest probed scale."""


class InsufficientSamples(ValueError):
    """Too few replicas for the requested moment order."""


@dataclass
class MomentEstimate:
    m: float
    value: float
    stderr: float
    replicas: int
    sufficient: bool = True


def _samples(sampler, replicas: int | None) -> np.ndarray:
    if callable(sampler):
        x = np.array([sampler(r) for r in range(replicas)], dtype=float)
    else:
        x = np.asarray(sampler, dtype=float).ravel()
        if replicas is not None and x.size != replicas:
            raise ValueError("sample count does not match replicas")
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise FloatingPointError(f"non-finite sample at replica {bad[0]}")
    return x


def estimate_moment(sampler, m: float = 2.0, replicas: int | None = None, seed: int = 0,
                    resamples: int = 200) -> MomentEstimate:
    """(E|X|^m)^{1/m} with a bootstrap standard error.

    ``sampler`` is either a function of the replica index or the array of
    samples itself. For m > 2 the relative error of the m-th moment must be
    below 10% for the estimate to count as sufficient.
    """
    x = _samples(sampler, replicas)
    n = x.size
    if n < 100:
        raise ValueError("at least 100 replicas are required")
    if resamples < 200:
        raise ValueError("at least 200 bootstrap resamples are required")
    a = np.abs(x) ** m
    value = float(np.mean(a) ** (1.0 / m))
    if np.all(a == a[0]):
        return MomentEstimate(m, value, 0.0, n)
    gen = replica_generator(seed, 0, BOOTSTRAP_STREAM)
    boot = np.empty(resamples)
    for i in range(resamples):
        idx = gen.integers(0, n, n)
        boot[i] = np.mean(a[idx]) ** (1.0 / m)
    rel = float(np.std(a, ddof=1) / (np.mean(a) * math.sqrt(n))) if np.mean(a) > 0 else 0.0
    return MomentEstimate(m, value, float(np.std(boot, ddof=1)), n, bool(m <= 2 or rel < 0.1))


@dataclass
class SlopeFit:
    scales: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    exponent: float
    intercept: float
    rsquared: float
    halfwidth: float
    extra: dict = field(default_factory=dict)

    def within(self, target: float, band: float) -> bool:
        return abs(self.exponent - target) <= band

    def rows(self):
        return [(float(s), float(v), float(e)) for s, v, e in zip(self.scales, self.values, self.stderr)]


def span_ok(scales) -> bool:
    s = np.asarray(scales, dtype=float)
    if s.size < 4:
        return False
    ratio = s.max() / s.min()
    return math.log10(ratio) >= 2.0 - 1e-12 or math.log2(ratio) + 1 >= 6 - 1e-12


def fit_slope(scales, values, stderr=None, check_span: bool = True, base: float | None = None) -> SlopeFit:
    """Least-squares slope of log(values) against log(scales).

    With ``base`` given, scales are used as they are (for example dyadic
    levels) and only values are logged in that base.
    """
    x = np.asarray(scales, dtype=float)
    y = np.asarray(values, dtype=float)
    e = np.zeros_like(y) if stderr is None else np.asarray(stderr, dtype=float)
    if check_span and not span_ok(x):
        raise ValueError("slope fits need >= 4 scales spanning 2 decades or 6 dyadic levels")
    if np.any(y <= 0):
        raise ValueError("log-log fit needs positive values")
    if base is None:
        lx, ly = np.log(x), np.log(y)
    else:
        lx, ly = x, np.log(y) / math.log(base)
    res = stats.linregress(lx, ly)
    n = x.size
    q = stats.t.ppf(0.975, n - 2) if n > 2 else math.inf
    r2 = float(res.rvalue**2) if np.ptp(ly) > 0 else 1.0
    return SlopeFit(x, y, e, float(res.slope), float(res.intercept), r2, float(q * res.stderr))


# ---------------------------------------------------------------- V(kappa) seminorm


@dataclass
class HolderSeminormReport:
    kappa: float
    m: float
    seminorm: float
    maximizer: tuple
    table: list
    fit: SlopeFit | None = None


class IncrementRecorder(Observer):
    """Samples of K_t(x) - P_{t-s} K_s(x) for (s, t) step pairs at one node."""

    def __init__(self, pairs, node: int, replicas: int, channel: int = 0):
        self.pairs = [(int(s), int(t)) for s, t in pairs]
        self.node = int(node)
        self.channel = channel
        self.by_t = {}
        for j, (s, t) in enumerate(self.pairs):
            self.by_t.setdefault(t, []).append((j, s))
        self.steps = sorted(self.by_t)
        self.data = np.empty((replicas, len(self.pairs)))

    def observe(self, k, state, rows):
        for j, s in self.by_t[k]:
            self.data[rows, j] = state.restart(self.channel, s)[:, self.node]


def dyadic_pairs(grid: SpaceTimeGrid, starts, gaps):
    """Step pairs (s, s + gap) inside the horizon for the given times."""
    out = []
    for s in starts:
        for g in gaps:
            if s + g <= grid.horizon + 1e-12:
                out.append((grid.step_of(s), grid.step_of(s + g)))
    return out


def simulate_increments(drift, domain: DomainSpec, grid: SpaceTimeGrid, starts, gaps, replicas: int,
                        seed: int = 0, x: float | None = None, scheme: str = "explicit", threads: int = 1):
    """Run the drift ensemble once and record K increments for every (s, gap)."""
    pairs = dyadic_pairs(grid, starts, gaps)
    if x is None:
        x = 0.0 if domain.kind == "free_line" else 0.5
    node = domain.node_index(x, grid.nx)
    restarts = tuple(sorted({s for s, _ in pairs}))
    runner = EnsembleRunner(grid, domain, scheme, [Channel(drift, 0.0, restarts)])
    rec = IncrementRecorder(pairs, node, replicas)
    info = runner.run(seed, replicas, rec, threads=threads)
    times = [(s * grid.dt, (t - s) * grid.dt) for s, t in pairs]
    return times, rec.data, info


def vclass_seminorm(times, samples: np.ndarray, kappa: float, m: float = 2.0, seed: int = 0,
                    fit_gaps: tuple | None = None) -> HolderSeminormReport:
    """Seminorm sup ||K_t - P_{t-s} K_s||_{L_m} / (t-s)^kappa over the sampled pairs.

    ``times`` lists (s, gap) per column of ``samples``. The gap exponent is
    fitted to the per-gap maximum over s within ``fit_gaps`` (inclusive
    bounds), which is the quantity the seminorm controls.
    """
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    table = []
    best = (-1.0, None)
    for j, (s, gap) in enumerate(times):
        est = estimate_moment(samples[:, j], m, seed=seed)
        if not est.sufficient:
            raise InsufficientSamples(f"too few replicas for m={m} at s={s}, gap={gap}")
        ratio = est.value / gap**kappa
        table.append({"s": s, "gap": gap, "norm": est.value, "stderr": est.stderr, "ratio": ratio})
        if ratio > best[0]:
            best = (ratio, (s, gap))
    fit = None
    gaps = sorted({row["gap"] for row in table})
    if fit_gaps is not None:
        gaps = [g for g in gaps if fit_gaps[0] - 1e-15 <= g <= fit_gaps[1] + 1e-15]
    per_gap = []
    for g in gaps:
        rows = [r for r in table if r["gap"] == g]
        top = max(rows, key=lambda r: r["norm"])
        per_gap.append((g, top["norm"], top["stderr"]))
    if len(per_gap) >= 4 and all(v > 0 for _, v, _ in per_gap):
        arr = np.array(per_gap)
        fit = fit_slope(arr[:, 0], arr[:, 1], arr[:, 2])
    return HolderSeminormReport(kappa, m, float(max(best[0], 0.0)), best[1], table, fit)


# ---------------------------------------------------------------- occupation functionals


def saturation_guard(eps: float, t_min: float, ratio: float = 0.25) -> None:
    """Abort when eps is not small against the spread sqrt(t_min / pi) of V."""
    if eps > ratio * math.sqrt(t_min / math.pi):
        raise SaturationError(
            f"eps={eps} is not below {ratio} * sqrt(t_min/pi) = {ratio * math.sqrt(t_min / math.pi):.4g}"
        )


class OccupationRecorder(Observer):
    def __init__(self, steps, node: int, replicas: int, count: int):
        self.steps = sorted(int(s) for s in steps)
        self._pos = {s: i for i, s in enumerate(self.steps)}
        self.node = node
        self.data = np.empty((count, replicas, len(self.steps)))

    def observe(self, k, state, rows):
        i = self._pos[k]
        for q in range(self.data.shape[0]):
            self.data[q, rows, i] = state.occupation(q)[:, self.node]


def occupation_samples(drift: MollifiedDrift, domain: DomainSpec, grid: SpaceTimeGrid, times, kappas,
                       replicas: int, seed: int = 0, x: float | None = None, scheme: str = "explicit",
                       threads: int = 1) -> np.ndarray:
    """Samples of int_0^t int p_{t-r}(x,y) b_eps(V_r(y) + kappa) dy dr, shape (kappas, replicas, times)."""
    if x is None:
        x = 0.0 if domain.kind == "free_line" else 0.5
    node = domain.node_index(x, grid.nx)
    steps = [grid.step_of(t) for t in times]
    occ = [Occupation(drift, float(k), 0) for k in kappas]
    runner = EnsembleRunner(grid, domain, scheme, occupations=occ)
    rec = OccupationRecorder(steps, node, replicas, len(occ))
    runner.run(seed, replicas, rec, threads=threads)
    return rec.data


def regularization_exponent(drift: MollifiedDrift, domain: DomainSpec, nx: int, scales, replicas: int,
                            kappa: float = 0.0, seed: int = 0, cfl: float = 0.25, x: float | None = None,
                            threads: int = 1, scheme: str = "explicit", dt: float | None = None) -> SlopeFit:
    """L_2 norm of the occupation functional from s = 0 against t, and its log-log slope."""
    scales = np.sort(np.asarray(scales, dtype=float))
    saturation_guard(drift.eps, float(scales[0]))
    grid = SpaceTimeGrid.for_domain(domain, nx, float(scales[-1]), cfl=cfl, dt=dt)
    data = occupation_samples(drift, domain, grid, scales, [kappa], replicas, seed, x, scheme, threads)[0]
    ests = [estimate_moment(data[:, i], 2, seed=seed) for i in range(scales.size)]
    fit = fit_slope(scales, [e.value for e in ests], [e.stderr for e in ests])
    fit.extra.update({"grid": grid.to_dict(), "kappa": kappa, "eps": drift.eps, "scheme": scheme})
    return fit


def offset_difference_slope(drift: MollifiedDrift, domain: DomainSpec, nx: int, t: float, base: float,
                            offsets, replicas: int, seed: int = 0, cfl: float = 0.25, threads: int = 1,
                            scheme: str = "explicit", dt: float | None = None) -> SlopeFit:
    """||Q(base + d) - Q(base)||_{L_2} at fixed t against the offset d."""
    offsets = np.sort(np.asarray(offsets, dtype=float))
    grid = SpaceTimeGrid.for_domain(domain, nx, t, cfl=cfl, dt=dt)
    data = occupation_samples(drift, domain, grid, [t], [base, *(base + offsets)], replicas, seed,
                              scheme=scheme, threads=threads)
    ref = data[0, :, 0]
    ests = [estimate_moment(data[i + 1, :, 0] - ref, 2, seed=seed) for i in range(offsets.size)]
    return fit_slope(offsets, [e.value for e in ests], [e.stderr for e in ests], check_span=False)


# ---------------------------------------------------------------- sewing


class AdditiveGerm:
    """A_{s,t} = F_t - F_s for a functional F of the state."""

    needs_right = True

    def __init__(self, functional: Callable):
        self.functional = functional

    def value(self, state):
        return np.array(self.functional(state), dtype=float)


class LeftPointGerm:
    """A_{s,t} = V_s(x) (t - s): the left-point Riemann germ of int V_r(x) dr."""

    needs_right = False

    def __init__(self, node: int):
        self.node = node

    def left(self, state, a: float, b: float):
        return state.V[:, self.node] * (b - a)


class OccupationGerm:
    """A_{a,b} = E[int_a^b int p_{T-r}(x,y) g_eps(V_r(y) + kappa) dy dr | F_a].

    Given V_a, V_r = e^{(r-a)A} V_a + Z with Var Z = sigma(r-a) at every node
    of the torus, so the conditional expectation is
    int_a^b [e^{(T-r)A} g_{eps + sigma(r-a)}(e^{(r-a)A} V_a + kappa)](x) dr,
    evaluated by Gauss-Legendre in sqrt(r - a).
    """

    needs_right = False

    def __init__(self, domain: DomainSpec, nx: int, eps: float, horizon: float, node: int,
                 kappa: float = 0.0, order: int = 12):
        if domain.kind == "neumann":
            raise ValueError("the occupation germ needs a translation invariant grid")
        self.basis = GridBasis(domain, nx)
        self.eps = eps
        self.horizon = horizon
        self.node = node
        self.kappa = kappa
        s, w = np.polynomial.legendre.leggauss(order)
        self.s = 0.5 * (s + 1.0)
        self.w = 0.5 * w
        self._cache = {}

    def _sigma(self, tau):
        b = self.basis
        lam = np.where(b.eig < 0, b.eig, -1.0)
        mv = np.where(b.eig < 0, np.expm1(2 * lam * tau) / (2 * lam), tau) / b.dx
        return float(np.sum(b.node_weights(0) * mv))

    def _plan(self, a: float, b: float):
        key = (round(a, 15), round(b, 15))
        if key not in self._cache:
            h = b - a
            bas = self.basis
            e = np.zeros(bas.nx)
            e[self.node] = 1.0
            ex = bas.forward(e)
            plan = []
            for sq, wq in zip(self.s, self.w):
                tau = h * sq * sq
                r = a + tau
                row = bas.inverse(np.exp((self.horizon - r) * bas.eig) * ex)
                var = self.eps + self._sigma(tau)
                plan.append((np.exp(tau * bas.eig), row, var, 2.0 * h * sq * wq))
            self._cache[key] = plan
        return self._cache[key]

    def left(self, state, a: float, b: float):
        bas = self.basis
        vh = bas.forward(state.V)
        out = np.zeros(state.V.shape[0])
        for mult, row, var, weight in self._plan(a, b):
            y = bas.inverse(mult * vh) + self.kappa
            g = np.exp(-0.5 * y * y / var) / math.sqrt(2.0 * math.pi * var)
            out += weight * (g @ row)
        return out


class SewingObserver(Observer):
    """Collects germ terms of the dyadic sums A^k_{s,t} for k = 0..levels.

    Terms are kept per level and added with exact rounding (math.fsum), so
    the telescoping of an additive germ cancels without rounding residue.
    """

    def __init__(self, germ, grid: SpaceTimeGrid, s_step: int, t_step: int, levels: int, replicas: int):
        span = t_step - s_step
        if span % (1 << levels):
            raise ValueError("the finest dyadic level must fall on grid steps")
        self.germ = germ
        self.grid = grid
        self.levels = levels
        self.s_step = s_step
        self.fine = span >> levels
        self.steps = [s_step + j * self.fine for j in range((1 << levels) + 1)]
        if germ.needs_right:
            self.values = np.empty((replicas, (1 << levels) + 1))
        else:
            self.terms = [np.empty((replicas, 1 << k)) for k in range(levels + 1)]

    def observe(self, k, state, rows):
        j = (k - self.s_step) // self.fine
        if self.germ.needs_right:
            self.values[rows, j] = self.germ.value(state)
            return
        for lev in range(self.levels + 1):
            stride = 1 << (self.levels - lev)
            if j % stride or j == (1 << self.levels):
                continue
            a = k * self.grid.dt
            b = (k + stride * self.fine) * self.grid.dt
            self.terms[lev][rows, j // stride] = self.germ.left(state, a, b)

    @property
    def sums(self) -> np.ndarray:
        if self.germ.needs_right:
            reps = self.values.shape[0]
            out = np.empty((reps, self.levels + 1))
            for lev in range(self.levels + 1):
                f = self.values[:, :: 1 << (self.levels - lev)]
                for r in range(reps):
                    out[r, lev] = math.fsum(np.concatenate([f[r, 1:], -f[r, :-1]]))
            return out
        return np.array([[math.fsum(t[r]) for t in self.terms] for r in range(self.terms[0].shape[0])])


def sewing_rate(sums: np.ndarray, seed: int = 0) -> SlopeFit:
    """Geometric decay of ||A^{k+1} - A^k||_{L_2} in k; ``exponent`` holds the rate.

    A rate <= 0 (non-Cauchy) is reported in ``extra['cauchy']``. Identically
    zero differences give an infinite rate.
    """
    diffs = np.diff(sums, axis=1)
    levels = np.arange(diffs.shape[1], dtype=float)
    ests = [estimate_moment(diffs[:, k], 2, seed=seed) for k in range(diffs.shape[1])]
    vals = np.array([e.value for e in ests])
    errs = np.array([e.stderr for e in ests])
    if np.all(vals == 0):
        fit = SlopeFit(levels, vals, errs, math.inf, 0.0, 1.0, 0.0)
        fit.extra.update({"cauchy": True, "max_abs_difference": 0.0})
        return fit
    fit = fit_slope(levels, vals, errs, check_span=False, base=2.0)
    fit.exponent = -fit.exponent
    fit.extra.update({"cauchy": bool(fit.exponent > 0), "max_abs_difference": float(np.abs(diffs).max())})
    return fit


def run_sewing(germ, domain: DomainSpec, grid: SpaceTimeGrid, s: float, t: float, levels: int, replicas: int,
               seed: int = 0, scheme: str = "exponential", threads: int = 1) -> np.ndarray:
    """Simulate V and return the (replicas, levels + 1) dyadic sums of ``germ``."""
    runner = EnsembleRunner(grid, domain, scheme)
    obs = SewingObserver(germ, grid, grid.step_of(s), grid.step_of(t), levels, replicas)
    runner.run(seed, replicas, obs, threads=threads)
    return obs.sums
