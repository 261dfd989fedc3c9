"""Space-time white noise on a grid and the stochastic convolution V.

Randomness comes from counter-based Philox streams keyed by
(master seed, replica, stream id), so every replica is reproducible on its
own and independent of how replicas are batched or scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import special

from .domain_kernels import DomainSpec, GridBasis, KernelEvaluator

NOISE_STREAM = 0
AUX_STREAM = 1
BOOTSTRAP_STREAM = 2


def replica_generator(seed: int, replica: int, stream: int = NOISE_STREAM) -> np.random.Generator:
    """Philox generator for one (seed, replica, stream) triple."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replica), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SpaceTimeGrid:
    nx: int
    dx: float
    nt: int
    dt: float

    def __post_init__(self):
        if self.nx < 2 or self.nt < 1:
            raise ValueError("grid needs nx >= 2 and nt >= 1")
        if not (self.dx > 0 and self.dt > 0):
            raise ValueError("grid spacings must be positive")

    @classmethod
    def for_domain(
        cls,
        domain: DomainSpec,
        nx: int,
        horizon: float,
        cfl: float = 0.25,
        dt: float | None = None,
    ) -> "SpaceTimeGrid":
        """Grid covering ``domain`` with nx nodes; dt defaults to cfl * dx^2."""
        dx = domain.length / nx
        if dt is None:
            dt = cfl * dx * dx
        nt = int(round(horizon / dt))
        if nt < 1 or abs(nt * dt - horizon) > 1e-9 * horizon:
            raise ValueError(f"horizon {horizon} is not a multiple of dt {dt}")
        return cls(int(nx), dx, nt, dt)

    @property
    def horizon(self) -> float:
        return self.nt * self.dt

    @property
    def cfl(self) -> float:
        return self.dt / self.dx**2

    @property
    def noise_scale(self) -> float:
        """Standard deviation of xi / dx for one cell, sqrt(dt / dx)."""
        return math.sqrt(self.dt / self.dx)

    def times(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    def step_of(self, t: float) -> int:
        k = int(round(t / self.dt))
        if abs(k * self.dt - t) > 1e-9 * max(t, self.dt) or not 0 <= k <= self.nt:
            raise ValueError(f"time {t} is not a grid time")
        return k

    def to_dict(self) -> dict:
        return {"nx": self.nx, "dx": self.dx, "nt": self.nt, "dt": self.dt}


@dataclass(frozen=True)
class NoiseRealization:
    """White-noise increments xi[k][i] ~ N(0, dt dx) for one replica.

    ``cutoff`` zeroes every increment from that step on, which is how
    adaptedness of the solver is tested.
    """

    grid: SpaceTimeGrid
    seed: int
    replica: int = 0
    cutoff: int | None = None

    def standard_blocks(self, chunk: int = 256, stream: int = NOISE_STREAM) -> Iterator[np.ndarray]:
        """Successive (<= chunk, nx) blocks of standard normals in time order."""
        gen = replica_generator(self.seed, self.replica, stream)
        k = 0
        while k < self.grid.nt:
            c = min(chunk, self.grid.nt - k)
            block = gen.standard_normal((c, self.grid.nx))
            if self.cutoff is not None and k + c > self.cutoff:
                block[max(0, self.cutoff - k):] = 0.0
            yield block
            k += c

    def standard(self, stream: int = NOISE_STREAM) -> np.ndarray:
        return np.concatenate(list(self.standard_blocks(self.grid.nt, stream)), axis=0)

    @property
    def increments(self) -> np.ndarray:
        return self.standard() * math.sqrt(self.grid.dt * self.grid.dx)

    def truncated(self, k: int) -> "NoiseRealization":
        return NoiseRealization(self.grid, self.seed, self.replica, int(k))


def sample_noise(grid: SpaceTimeGrid, seed: int, replica: int = 0) -> NoiseRealization:
    return NoiseRealization(grid, int(seed), int(replica))


class NoiseBatch:
    """Standard normals for a batch of replicas, produced chunk by chunk.

    Each replica draws from its own stream in the same order as
    :meth:`NoiseRealization.standard_blocks`, so batching never changes values.
    """

    def __init__(self, grid: SpaceTimeGrid, seed: int, replicas: Sequence[int], stream: int = NOISE_STREAM,
                 width: int | None = None, cutoff: int | None = None):
        self.grid = grid
        self.width = grid.nx if width is None else width
        self.cutoff = cutoff
        self.gens = [replica_generator(seed, r, stream) for r in replicas]

    def blocks(self, chunk: int) -> Iterator[np.ndarray]:
        nb = len(self.gens)
        k = 0
        while k < self.grid.nt:
            c = min(chunk, self.grid.nt - k)
            buf = np.empty((nb, c, self.width))
            for b, gen in enumerate(self.gens):
                gen.standard_normal(out=buf[b])
            if self.cutoff is not None and k + c > self.cutoff:
                buf[:, max(0, self.cutoff - k):] = 0.0
            yield buf
            k += c


@dataclass(frozen=True)
class Field:
    """Values u_{t_k}(x_i) on the stored time levels ``steps``."""

    grid: SpaceTimeGrid
    steps: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != (len(self.steps), self.grid.nx):
            raise ValueError("field values do not match grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite entries")

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.steps) * self.grid.dt

    def at_step(self, k: int) -> np.ndarray:
        idx = np.searchsorted(self.steps, k)
        if idx >= len(self.steps) or self.steps[idx] != k:
            raise KeyError(f"step {k} not stored")
        return self.values[idx]


def stochastic_convolution(noise: NoiseRealization, k: KernelEvaluator, scheme: str = "explicit",
                           save_every: int = 1) -> Field:
    """V: the zero-drift, zero-initial solver output driven by ``noise``."""
    from .solver import SolverConfig, solve

    cfg = SolverConfig(noise.grid, k.domain, drift=None, scheme=scheme, save_every=save_every)
    return solve(cfg, noise).V


def free_line_variance(t):
    """Var V_t(x) on the line: int_0^t g_{2r}(0) dr = sqrt(t / pi)."""
    return np.sqrt(np.asarray(t, dtype=float) / np.pi)


def periodic_variance(t, terms: int | None = None):
    """Var V_t(x) on the periodic unit interval by its Fourier series.

    Past ``terms`` the factors 1 - exp(-lam t) are 1 to double precision and
    the remaining sum of 2 / lam is the trigamma value psi'(terms + 1) / (2 pi^2).
    """
    t = np.asarray(t, dtype=float)
    if terms is None:
        tmin = float(np.min(t)) if t.size else 1.0
        terms = max(64, int(math.ceil(math.sqrt(40.0 / (4.0 * np.pi**2 * max(tmin, 1e-12))))))
    j = np.arange(1, terms + 1)
    lam = 4.0 * np.pi**2 * j**2
    body = 2.0 * np.sum(-np.expm1(-np.multiply.outer(t, lam)) / lam, axis=-1)
    return t + body + special.polygamma(1, terms + 1) / (2.0 * np.pi**2)


def mode_variance(basis: GridBasis, scheme: str, dt: float, steps: int) -> np.ndarray:
    """Per-mode variance of the discrete V after ``steps`` steps of a scheme."""
    lam = basis.eig
    s2 = dt / basis.dx
    if scheme == "explicit":
        q = (1.0 + dt * lam) ** 2
        return s2 * _geometric(q, steps, first=0)
    if scheme == "semi_implicit":
        q = 1.0 / (1.0 - dt * lam) ** 2
        return s2 * _geometric(q, steps, first=1)
    if scheme == "exponential":
        t = steps * dt
        lam_safe = np.where(lam < 0, lam, -1.0)
        return np.where(lam < 0, np.expm1(2 * lam_safe * t) / (2 * lam_safe), t) / basis.dx
    raise ValueError(f"unknown scheme {scheme!r}")


def _geometric(q: np.ndarray, n: int, first: int) -> np.ndarray:
    """sum_{m=first}^{first+n-1} q^m, elementwise."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = q**first * (1.0 - q**n) / (1.0 - q)
    return np.where(q == 1.0, float(n), out)


def discrete_variance(domain: DomainSpec, grid: SpaceTimeGrid, scheme: str, steps: int, node: int) -> float:
    """Exact variance of the discrete V at one node; the oracle for grid effects."""
    basis = GridBasis(domain, grid.nx)
    return float(np.sum(basis.node_weights(node) * mode_variance(basis, scheme, grid.dt, steps)))


def smoothed_density(variance, eps):
    """E g_eps(Z) for Z ~ N(0, variance): the Gaussian composition (2 pi (v + eps))^{-1/2}."""
    return 1.0 / np.sqrt(2.0 * np.pi * (np.asarray(variance, dtype=float) + eps))


def conditional_smoothing_exponent(
    k: KernelEvaluator,
    f: Callable[[np.ndarray], np.ndarray],
    scales: Sequence[float],
    replicas: int,
    nx: int,
    seed: int = 0,
    x: float | None = None,
    eps: float | None = None,
    scheme: str = "exponential",
    dt: float | None = None,
    threads: int = 1,
):
    """Fit the decay exponent of t -> E f(V_t(x)) over ``scales``.

    With ``eps`` given, f is taken to be g_eps and the fit is flagged as
    saturated when eps is not small against the spread sqrt(t_min / pi).
    Returns a SlopeFit whose ``extra`` holds the per-scale table.
    """
    from .analysis import fit_slope
    from .solver import EnsembleRunner, PointRecorder

    scales = np.sort(np.asarray(scales, dtype=float))
    if dt is None:
        dt = float(scales[0])
    if x is None:
        x = 0.0 if k.domain.kind != "neumann" else 0.5
    grid = SpaceTimeGrid.for_domain(k.domain, nx, float(scales[-1]), dt=dt)
    steps = [grid.step_of(t) for t in scales]
    node = k.domain.node_index(x, nx)
    rec = PointRecorder(steps, [node], replicas)
    EnsembleRunner(grid, k.domain, scheme=scheme).run(seed, replicas, rec, threads=threads)
    samples = f(rec.values("V")[:, :, 0])
    mean = samples.mean(axis=0)
    err = samples.std(axis=0, ddof=1) / math.sqrt(replicas)
    fit = fit_slope(scales, mean, err)
    saturated = eps is not None and eps > 0.25 * math.sqrt(scales[0] / math.pi)
    fit.extra.update({"saturated": bool(saturated), "node": node, "x": float(k.domain.nodes(nx)[node])})
    return fit
