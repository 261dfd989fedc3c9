"""Heat kernels of 1/2 d^2/dx^2 on the free line, the periodic unit interval and
the Neumann unit interval, together with their semigroups.

All kernels are image sums of the Gaussian density g_t(z) = (2 pi t)^{-1/2}
exp(-z^2 / 2t). The free line is realized as a periodic torus [-L, L) so that
it can share the spectral machinery of the solver; its images sit at
multiples of 2L and their total mass is reported as a tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

FREE_LINE = "free_line"
PERIODIC = "periodic"
NEUMANN = "neumann"
KINDS = (FREE_LINE, PERIODIC, NEUMANN)

# images beyond this magnitude are below double precision noise
IMAGE_CUTOFF = 1e-14


def gaussian(t, z):
    """Heat density g_t(z) of Brownian motion with variance t."""
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z / t) / np.sqrt(2.0 * np.pi * t)


@dataclass(frozen=True)
class DomainSpec:
    """Spatial domain together with its boundary rule.

    ``half_width`` is only used by the free line, which lives on [-L, L).
    ``n_images`` fixes the number of images |n| <= N in kernel sums; None
    picks it adaptively so that the first omitted image is below 1e-14.
    """

    kind: str
    half_width: float | None = None
    n_images: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == FREE_LINE:
            if self.half_width is None or not self.half_width > 0:
                raise ValueError("free line needs a positive half_width")
        if self.n_images is not None and self.n_images < 1:
            raise ValueError("n_images must be at least 1")

    @classmethod
    def free_line(cls, half_width: float, n_images: int | None = None) -> "DomainSpec":
        return cls(FREE_LINE, float(half_width), n_images)

    @classmethod
    def periodic(cls, n_images: int | None = None) -> "DomainSpec":
        return cls(PERIODIC, None, n_images)

    @classmethod
    def neumann(cls, n_images: int | None = None) -> "DomainSpec":
        return cls(NEUMANN, None, n_images)

    @property
    def length(self) -> float:
        return 2.0 * self.half_width if self.kind == FREE_LINE else 1.0

    @property
    def lower(self) -> float:
        return -self.half_width if self.kind == FREE_LINE else 0.0

    @property
    def period(self) -> float:
        """Spacing of the images in the kernel sum."""
        if self.kind == FREE_LINE:
            return 2.0 * self.half_width
        return 1.0 if self.kind == PERIODIC else 2.0

    def nodes(self, nx: int) -> np.ndarray:
        """Grid nodes used by the solver: cell centres for Neumann, left ends otherwise."""
        dx = self.length / nx
        offset = 0.5 if self.kind == NEUMANN else 0.0
        return self.lower + (np.arange(nx) + offset) * dx

    def node_index(self, x: float, nx: int) -> int:
        return int(np.argmin(np.abs(self.nodes(nx) - x)))

    def distance(self, x, y):
        """Geodesic distance: wrapped on tori, plain on the Neumann interval."""
        d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        if self.kind == NEUMANN:
            return d
        return np.minimum(d, self.length - d)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.half_width is not None:
            out["half_width"] = self.half_width
        if self.n_images is not None:
            out["n_images"] = self.n_images
        return out


def image_count(t: float, period: float, cutoff: float = IMAGE_CUTOFF) -> int:
    """Smallest N >= 1 such that g_t(N * period) < cutoff."""
    # g_t(z) < c  <=>  z^2 > -2t log(c sqrt(2 pi t))
    rhs = -2.0 * t * math.log(cutoff * math.sqrt(2.0 * math.pi * t))
    if rhs <= 0:
        return 1
    return max(1, math.ceil(math.sqrt(rhs) / period))


def image_tail_bound(t: float, period: float, n_images: int) -> float:
    """Mass-free bound on the sum of omitted images |n| > N at any pair x, y.

    For |x - y| <= period each omitted image is at distance at least
    (|n| - 1) * period, so the tail is bounded by 2 sum_{m >= N} g_t(m period).
    """
    m = np.arange(n_images, n_images + 200)
    return float(2.0 * np.sum(gaussian(t, m * period)))


class KernelEvaluator:
    """Evaluates p_t(x, y) for a domain; immutable apart from a read-only cache."""

    def __init__(self, domain: DomainSpec):
        self.domain = domain

    def images(self, t: float) -> int:
        if self.domain.n_images is not None:
            return self.domain.n_images
        return image_count(t, self.domain.period)

    def tail_bound(self, t: float) -> float:
        return image_tail_bound(t, self.domain.period, self.images(t))

    def __call__(self, t: float, x, y):
        return kernel_eval(t, x, y, self)

    def matrix(self, t: float, nx: int) -> np.ndarray:
        """Kernel sampled on the solver nodes, p_t(x_i, x_j); cached per (t, nx)."""
        return _kernel_matrix(self.domain, float(t), int(nx))


@lru_cache(maxsize=64)
def _kernel_matrix(domain: DomainSpec, t: float, nx: int) -> np.ndarray:
    x = domain.nodes(nx)
    mat = kernel_eval(t, x[:, None], x[None, :], KernelEvaluator(domain))
    mat.setflags(write=False)
    return mat


def kernel_eval(t: float, x, y, k: KernelEvaluator):
    """Truncated image sum for p_t(x, y); broadcasts over x and y."""
    if not t > 0:
        raise ValueError(f"kernel time must be positive, got {t}")
    dom = k.domain
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n_img = k.images(t)
    n = np.arange(-n_img, n_img + 1)
    shape = np.broadcast(x, y).shape
    # |x - y| with a symmetric image range makes p_t(x, y) == p_t(y, x) bit for bit
    diff = np.abs(np.asarray(x - y))[..., None]
    if dom.kind == NEUMANN:
        summ = np.asarray(x + y)[..., None]
        vals = gaussian(t, diff + 2.0 * n).sum(axis=-1) + gaussian(t, summ + 2.0 * n).sum(axis=-1)
    else:
        vals = gaussian(t, diff + dom.period * n).sum(axis=-1)
    return vals if shape else float(vals)


def _weights(domain: DomainSpec, nx: int) -> np.ndarray:
    # periodic trapezoid and cell-centred midpoint both reduce to equal weights
    return np.full(nx, domain.length / nx)


def semigroup_apply(t: float, f: np.ndarray, k: KernelEvaluator) -> np.ndarray:
    """P_t f by quadrature on the solver nodes of ``f``.

    Each row of quadrature weights is normalized to unit mass, which makes
    constants exact fixed points and keeps sup|P_t f| <= sup|f|.
    """
    f = np.asarray(f, dtype=float)
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    if t == 0:
        return f.copy()
    nx = f.shape[-1]
    w = k.matrix(t, nx) * _weights(k.domain, nx)
    w = w / w.sum(axis=1, keepdims=True)
    return f @ w.T


def diagonal_bounds(k: KernelEvaluator, times, points) -> dict:
    """Check (2 pi t)^{-1/2} <= p_t(x, x) <= C + 2 (2 pi t)^{-1/2} on samples.

    The constant C is not assumed; the smallest value that makes the upper
    bound hold on the samples is reported.
    """
    times = np.asarray(times, dtype=float)
    points = np.asarray(points, dtype=float)
    diag = np.array([[kernel_eval(t, x, x, k) for x in points] for t in times])
    peak = 1.0 / np.sqrt(2.0 * np.pi * times)[:, None]
    lower_ok = bool(np.all(diag >= peak * (1.0 - 1e-12)))
    constant = float(max(0.0, np.max(diag - 2.0 * peak)))
    return {
        "lower_ok": lower_ok,
        "empirical_constant": constant,
        "diagonal": diag,
        "times": times,
        "points": points,
    }


def _quadrature_grid(domain: DomainSpec, scale: float, max_points: int = 400_000) -> np.ndarray:
    h = scale / 24.0
    n = int(min(max_points, math.ceil(domain.length / h)))
    return domain.lower + (np.arange(n) + 0.5) * (domain.length / n)


def kernel_holder_constants(
    k: KernelEvaluator,
    alpha: float,
    times=None,
    separations=None,
    x: float | None = None,
) -> dict:
    """Largest observed ratios of the three kernel regularity integrals to their bounds.

    Returns ratios for
      space:  int |p_t(x1,y) - p_t(x2,y)| dy  /  |x1-x2|^a t^{-a/2}
      moment: int p_t(x,y) |y-x|^a dy         /  t^{a/2}
      time:   int |p_t(x,y) - p_s(x,y)| dy    /  s^{-a/2} (t-s)^{a/2},  s = t/2
    A finite maximum verifies the estimate on the sweep.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    dom = k.domain
    if times is None:
        times = np.logspace(-4, -1, 7)
    if separations is None:
        separations = np.logspace(-3, -1, 5)
    if x is None:
        x = 0.0 if dom.kind == FREE_LINE else 0.5
    rows = []
    for t in np.asarray(times, dtype=float):
        s = 0.5 * t
        y = _quadrature_grid(dom, math.sqrt(s))
        dy = dom.length / y.size
        pt = kernel_eval(t, x, y, k)
        ps = kernel_eval(s, x, y, k)
        moment = np.sum(pt * dom.distance(x, y) ** alpha) * dy
        time_int = np.sum(np.abs(pt - ps)) * dy
        for h in np.asarray(separations, dtype=float):
            x2 = x + h
            space = np.sum(np.abs(pt - kernel_eval(t, x2, y, k))) * dy
            rows.append(
                (
                    t,
                    h,
                    space / (h**alpha * t ** (-alpha / 2)),
                    moment / t ** (alpha / 2),
                    time_int / (s ** (-alpha / 2) * (t - s) ** (alpha / 2)),
                    space,
                )
            )
    table = np.array(rows)
    return {
        "alpha": alpha,
        "space_ratio": float(table[:, 2].max()),
        "moment_ratio": float(table[:, 3].max()),
        "time_ratio": float(table[:, 4].max()),
        "max_space_integral": float(table[:, 5].max()),
        "table": table,
    }


class GridBasis:
    """Orthonormal eigenbasis of the discrete operator 1/2 d^2/dx^2 on the nodes.

    Tori (periodic unit and truncated free line) use the real FFT with
    orthonormal scaling; the Neumann interval uses cell-centred nodes with
    mirror ghosts, whose eigenvectors are the orthonormal DCT-II basis.
    """

    def __init__(self, domain: DomainSpec, nx: int):
        self.domain = domain
        self.nx = int(nx)
        self.dx = domain.length / nx
        if domain.kind == NEUMANN:
            k = np.arange(nx)
            self.eig = -2.0 / self.dx**2 * np.sin(np.pi * k / (2 * nx)) ** 2
            self.multiplicity = np.ones(nx)
        else:
            k = np.arange(nx // 2 + 1)
            self.eig = -2.0 / self.dx**2 * np.sin(np.pi * k / nx) ** 2
            self.multiplicity = np.full(k.size, 2.0)
            self.multiplicity[0] = 1.0
            if nx % 2 == 0:
                self.multiplicity[-1] = 1.0
        self.eig[0] = 0.0

    @property
    def modes(self) -> int:
        return self.eig.size

    def forward(self, x: np.ndarray, workers: int = 1) -> np.ndarray:
        if self.domain.kind == NEUMANN:
            return sfft.dct(x, type=2, norm="ortho", axis=-1, workers=workers)
        return sfft.rfft(x, norm="ortho", axis=-1, workers=workers)

    def inverse(self, xh: np.ndarray, workers: int = 1) -> np.ndarray:
        if self.domain.kind == NEUMANN:
            return sfft.idct(xh, type=2, norm="ortho", axis=-1, workers=workers)
        return sfft.irfft(xh, n=self.nx, norm="ortho", axis=-1, workers=workers)

    def apply(self, multiplier: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Apply a function of the operator given by its values on the eigenvalues."""
        return self.inverse(multiplier * self.forward(x))

    def node_weights(self, i: int) -> np.ndarray:
        """Squared eigenvector entries at node i, so Var = sum(weights * mode_var)."""
        if self.domain.kind == NEUMANN:
            e = np.zeros(self.nx)
            e[i] = 1.0
            return self.forward(e) ** 2
        return self.multiplicity / self.nx
