"""Time stepping for du = 1/2 u'' dt + b_eps(u) dt + dW with the mild decomposition
u = P u0 + K + V carried exactly at the discrete level.

Three linear schemes share one interface:

explicit       u <- M u + dt b(u) + xi/dx,           M = I + dt A
semi_implicit  u <- R (u + dt b(u) + xi/dx),         R = (I - dt A)^{-1}
exponential    u <- E u + phi(dt A) dt b(u) + noise, E = exp(dt A), the noise
               being the exact Ornstein-Uhlenbeck increment of every mode
               conditioned on the cell increments xi

Here A is 1/2 of the discrete Laplacian. Because the schemes are linear in
the state, u, the pure-noise part V, the semigroup part P u0 and the drift
part K are advanced as separate arrays under the same noise, and u is
always their sum. Ensembles are advanced in batches of shape (batch, nx);
each replica reads its own noise stream.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as kern
from .domain_kernels import NEUMANN, DomainSpec, GridBasis
from .drifts import MollifiedDrift
from .noise_field import AUX_STREAM, NOISE_STREAM, Field, NoiseBatch, NoiseRealization, SpaceTimeGrid

SCHEMES = ("explicit", "semi_implicit", "exponential")


class GridScaleError(ValueError):
    """Mollification finer than the grid or a time step too large for the drift."""


@dataclass(frozen=True)
class SolverConfig:
    grid: SpaceTimeGrid
    domain: DomainSpec
    drift: MollifiedDrift | None = None
    scheme: str = "explicit"
    initial: float | np.ndarray = 0.0
    save_every: int = 1
    check_grid_scale: bool = True


@dataclass(frozen=True)
class Channel:
    """One solution sharing the ensemble noise: its drift, u0 and restart steps.

    A restart at step s carries D_t = K_t - P^{disc}_{t-s} K_s for t >= s.
    """

    drift: MollifiedDrift | None = None
    initial: float | np.ndarray = 0.0
    restarts: tuple = ()


@dataclass(frozen=True)
class Occupation:
    """Accumulator Q_t = sum_{s<=r<t} P^{disc}_{t-r-dt} f(V_r + kappa) dt started at ``start``."""

    drift: MollifiedDrift
    kappa: float = 0.0
    start: int = 0


def check_drift(drift: MollifiedDrift, grid: SpaceTimeGrid, scheme: str, check_grid_scale: bool = True) -> dict:
    """Enforce eps >= dx and dt * Lip(b_eps) < 1; report whether the explicit map is monotone."""
    lip = drift.lipschitz()
    if check_grid_scale and drift.eps < grid.dx:
        raise GridScaleError(f"mollification eps={drift.eps} is finer than dx={grid.dx}")
    if grid.dt * lip >= 1.0:
        raise GridScaleError(f"dt * Lip(b_eps) = {grid.dt * lip:.3g} must be below 1")
    monotone = scheme != "explicit" or grid.dt * lip <= 1.0 - grid.cfl
    return {"lipschitz": lip, "monotone": bool(monotone)}


class _Explicit:
    def __init__(self, grid: SpaceTimeGrid, domain: DomainSpec):
        if grid.cfl > 1.0:
            raise GridScaleError(f"explicit scheme needs dt/dx^2 <= 1, got {grid.cfl}")
        self.r = grid.cfl
        self.dt = grid.dt
        self.s = grid.noise_scale
        self.neumann = domain.kind == NEUMANN
        self.uses_aux = False

    def heat(self, y, out):
        kern.heat_only(y, self.r, self.neumann, out)

    def drift_step(self, y, b, out):
        kern.heat_axpy(y, b, self.dt, self.r, self.neumann, out)

    def noise_step(self, v, z, aux, out):
        kern.heat_axpy(v, z, self.s, self.r, self.neumann, out)


class _Spectral:
    def __init__(self, grid: SpaceTimeGrid, domain: DomainSpec, kind: str):
        self.basis = b = GridBasis(domain, grid.nx)
        lam = b.eig
        dt = grid.dt
        if kind == "semi_implicit":
            self.lin = 1.0 / (1.0 - dt * lam)
            self.drift_mult = self.lin * dt
            self.z_mult = self.lin * grid.noise_scale
            self.aux_mult = None
        else:
            neg = lam < 0
            safe = np.where(neg, lam, -1.0)
            c = np.where(neg, np.expm1(dt * safe) / safe, dt)
            v = np.where(neg, np.expm1(2 * dt * safe) / (2 * safe), dt)
            self.lin = np.exp(dt * lam)
            self.drift_mult = c
            self.z_mult = c / math.sqrt(dt) / math.sqrt(grid.dx)
            self.aux_mult = np.sqrt(np.maximum(v - c * c / dt, 0.0)) / math.sqrt(grid.dx)
        self.uses_aux = self.aux_mult is not None

    def heat(self, y, out):
        b = self.basis
        out[...] = b.inverse(self.lin * b.forward(y))

    def drift_step(self, y, f, out):
        b = self.basis
        out[...] = b.inverse(self.lin * b.forward(y) + self.drift_mult * b.forward(f))

    def noise_step(self, v, z, aux, out):
        b = self.basis
        acc = self.lin * b.forward(v) + self.z_mult * b.forward(z)
        if aux is not None:
            acc += self.aux_mult * b.forward(aux)
        out[...] = b.inverse(acc)


def make_stepper(grid: SpaceTimeGrid, domain: DomainSpec, scheme: str):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if abs(grid.dx * grid.nx - domain.length) > 1e-12 * domain.length:
        raise ValueError("grid spacing does not match the domain length")
    if scheme == "explicit":
        return _Explicit(grid, domain)
    return _Spectral(grid, domain, scheme)


class _DriftEval:
    """Dispatches G_eps b to the compiled mixture or table kernel."""

    def __init__(self, drift: MollifiedDrift):
        self.drift = drift
        mix = drift.mixture
        if mix is not None:
            self.mix = (np.ascontiguousarray(mix[0], float), np.ascontiguousarray(mix[1], float), float(mix[2]))
            self.tab = None
        else:
            self.mix = None
            self.tab = drift.table()

    def __call__(self, u1, u2, kappa, out) -> int:
        use2 = u2 is not None
        u2 = u1 if u2 is None else u2
        if self.mix is not None:
            locs, wts, const = self.mix
            return kern.mixture_eval(u1, u2, use2, kappa, locs, wts, self.drift.eps, const, out)
        x0, h, vals = self.tab
        return kern.table_eval(u1, u2, use2, kappa, x0, h, vals, out)


class _Pair:
    """Current array plus a spare output buffer."""

    __slots__ = ("cur", "spare")

    def __init__(self, arr):
        self.cur = arr
        self.spare = np.empty_like(arr)

    def swap(self):
        self.cur, self.spare = self.spare, self.cur


class BatchState:
    """Read-only view handed to observers at an observed step."""

    def __init__(self, runner: "EnsembleRunner", nb: int):
        nx = runner.grid.nx
        self._runner = runner
        self.step = 0
        self.V_ = _Pair(np.zeros((nb, nx)))
        self.P = []
        self.K = []
        self.D = []
        for ch in runner.channels:
            u0 = np.broadcast_to(np.asarray(ch.initial, dtype=float), (nx,))
            self.P.append(_Pair(np.tile(u0, (nb, 1))) if np.any(u0 != 0) else None)
            self.K.append(_Pair(np.zeros((nb, nx))))
            self.D.append({})
        self.Q = [None] * len(runner.occupations)

    @property
    def V(self) -> np.ndarray:
        return self.V_.cur

    def u(self, c: int = 0) -> np.ndarray:
        out = self.K[c].cur + self.V_.cur
        if self.P[c] is not None:
            out += self.P[c].cur
        return out

    def Pu0(self, c: int = 0) -> np.ndarray:
        p = self.P[c]
        return np.zeros_like(self.V_.cur) if p is None else p.cur

    def K_(self, c: int = 0) -> np.ndarray:
        return self.K[c].cur

    def restart(self, c: int, s: int) -> np.ndarray:
        return self.D[c][s].cur

    def occupation(self, i: int) -> np.ndarray:
        q = self.Q[i]
        if q is None:
            raise KeyError(f"occupation {i} has not started at step {self.step}")
        return q.cur


class Observer:
    """Base observer: ``steps`` lists the observed steps, ``observe`` records them."""

    steps: Sequence[int] = ()

    def observe(self, k: int, state: BatchState, rows: np.ndarray) -> None:
        raise NotImplementedError


class PointRecorder(Observer):
    """Stores chosen quantities at chosen steps and nodes for every replica.

    ``quantities`` maps a name to a function of the state returning a
    (batch, nx) array; "V" is recorded by default.
    """

    def __init__(self, steps, nodes, replicas: int, quantities: dict | None = None):
        self.steps = sorted(int(s) for s in steps)
        self._pos = {s: i for i, s in enumerate(self.steps)}
        self.nodes = np.asarray(nodes, dtype=int)
        self.quantities = quantities or {"V": lambda st: st.V}
        self.data = {
            name: np.empty((replicas, len(self.steps), self.nodes.size)) for name in self.quantities
        }

    def observe(self, k, state, rows):
        i = self._pos[k]
        for name, fn in self.quantities.items():
            self.data[name][rows, i, :] = fn(state)[:, self.nodes]

    def values(self, name: str) -> np.ndarray:
        return self.data[name]


class FieldRecorder(Observer):
    """Full fields of every channel at the saved steps, for a small batch."""

    def __init__(self, steps, nchannels: int, nreplicas: int, nx: int):
        self.steps = sorted(int(s) for s in steps)
        self._pos = {s: i for i, s in enumerate(self.steps)}
        shape = (nreplicas, len(self.steps), nx)
        self.V = np.empty(shape)
        self.u = [np.empty(shape) for _ in range(nchannels)]
        self.K = [np.empty(shape) for _ in range(nchannels)]
        self.P = [np.empty(shape) for _ in range(nchannels)]

    def observe(self, k, state, rows):
        i = self._pos[k]
        self.V[rows, i] = state.V
        for c in range(len(self.u)):
            self.K[c][rows, i] = state.K_(c)
            self.P[c][rows, i] = state.Pu0(c)
            self.u[c][rows, i] = state.u(c)


@dataclass
class RunInfo:
    replicas: int
    batches: int
    outside: dict = field(default_factory=dict)
    drift_checks: list = field(default_factory=list)


class EnsembleRunner:
    """Advances batches of replicas under common noise for several channels."""

    def __init__(
        self,
        grid: SpaceTimeGrid,
        domain: DomainSpec,
        scheme: str = "explicit",
        channels: Sequence[Channel] = (),
        occupations: Sequence[Occupation] = (),
        check_grid_scale: bool = True,
    ):
        self.grid = grid
        self.domain = domain
        self.scheme = scheme
        self.stepper = make_stepper(grid, domain, scheme)
        self.channels = list(channels)
        self.occupations = list(occupations)
        self.drift_checks = []
        for ch in self.channels:
            if ch.drift is not None:
                self.drift_checks.append(check_drift(ch.drift, grid, scheme, check_grid_scale))
        self._ch_eval = [None if ch.drift is None else _DriftEval(ch.drift) for ch in self.channels]
        self._occ_eval = [_DriftEval(o.drift) for o in self.occupations]

    # ------------------------------------------------------------------
    def run(self, seed: int, replicas, observers, batch: int | None = None, threads: int = 1,
            cutoff: int | None = None) -> RunInfo:
        ids = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas, dtype=int)
        if not isinstance(observers, (list, tuple)):
            observers = [observers]
        nx = self.grid.nx
        if batch is None:
            batch = max(1, min(ids.size, (1 << 17) // nx))
        # observers index rows by position in ``ids``
        positions = np.arange(ids.size)
        chunks = [(ids[i:i + batch], positions[i:i + batch]) for i in range(0, ids.size, batch)]
        outside = {}

        def work(item):
            return self._run_batch(seed, item[0], item[1], observers, cutoff)

        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(work, chunks))
        else:
            results = [work(c) for c in chunks]
        for res in results:
            for key, n in res.items():
                outside[key] = outside.get(key, 0) + n
        return RunInfo(int(ids.size), len(chunks), outside, list(self.drift_checks))

    # ------------------------------------------------------------------
    def _run_batch(self, seed, ids, rows, observers, cutoff) -> dict:
        grid = self.grid
        nb = ids.size
        nx = grid.nx
        st = BatchState(self, nb)
        stepper = self.stepper
        mask = {}
        for obs in observers:
            for s in obs.steps:
                if not 0 <= int(s) <= grid.nt:
                    raise ValueError(f"observed step {s} outside 0..{grid.nt}")
                mask.setdefault(int(s), []).append(obs)
        restart_at = {}
        for c, ch in enumerate(self.channels):
            for s in ch.restarts:
                restart_at.setdefault(int(s), []).append(c)
        occ_at = {}
        for i, o in enumerate(self.occupations):
            occ_at.setdefault(int(o.start), []).append(i)
        bvals = np.empty((nb, nx))
        outside = {}
        chunk = int(max(1, min(grid.nt, (1 << 22) // (nb * nx))))
        noise = NoiseBatch(grid, seed, ids, NOISE_STREAM, cutoff=cutoff).blocks(chunk)
        aux = NoiseBatch(grid, seed, ids, AUX_STREAM, cutoff=cutoff).blocks(chunk) if stepper.uses_aux else None

        def arrive(k):
            st.step = k
            for c in restart_at.get(k, ()):
                st.D[c][k] = _Pair(np.zeros((nb, nx)))
            for i in occ_at.get(k, ()):
                st.Q[i] = _Pair(np.zeros((nb, nx)))
            for obs in mask.get(k, ()):
                obs.observe(k, st, rows)

        arrive(0)
        k = 0
        for block in noise:
            ablock = next(aux) if aux is not None else None
            for c_i in range(block.shape[1]):
                z = block[:, c_i, :]
                a = ablock[:, c_i, :] if ablock is not None else None
                V = st.V_.cur
                for c, ev in enumerate(self._ch_eval):
                    if ev is None:
                        continue
                    P = st.P[c]
                    W = V if P is None else V + P.cur
                    n_out = ev(st.K[c].cur, W, 0.0, bvals)
                    if n_out:
                        outside[f"channel{c}"] = outside.get(f"channel{c}", 0) + n_out
                    stepper.drift_step(st.K[c].cur, bvals, st.K[c].spare)
                    st.K[c].swap()
                    for D in st.D[c].values():
                        stepper.drift_step(D.cur, bvals, D.spare)
                        D.swap()
                for i, ev in enumerate(self._occ_eval):
                    Q = st.Q[i]
                    if Q is None:
                        continue
                    n_out = ev(V, None, self.occupations[i].kappa, bvals)
                    if n_out:
                        outside[f"occupation{i}"] = outside.get(f"occupation{i}", 0) + n_out
                    stepper.drift_step(Q.cur, bvals, Q.spare)
                    Q.swap()
                for c, P in enumerate(st.P):
                    if P is not None:
                        stepper.heat(P.cur, P.spare)
                        P.swap()
                stepper.noise_step(V, z, a, st.V_.spare)
                st.V_.swap()
                k += 1
                arrive(k)
            if not np.isfinite(st.V_.cur).all() or not all(np.isfinite(K.cur).all() for K in st.K):
                raise FloatingPointError(f"non-finite state by step {k}")
        return outside


# ---------------------------------------------------------------- single paths


@dataclass(frozen=True)
class SolutionBundle:
    u: Field
    V: Field
    K: Field
    Pu0: Field
    outside: int = 0


def _saved_steps(grid: SpaceTimeGrid, save_every: int) -> list:
    steps = list(range(0, grid.nt + 1, max(1, int(save_every))))
    if steps[-1] != grid.nt:
        steps.append(grid.nt)
    return steps


def solve_coupled(cfgs: Sequence[SolverConfig], noise: NoiseRealization) -> list:
    """Solve several configurations driven by the identical noise array."""
    if not cfgs:
        return []
    ref = cfgs[0]
    for c in cfgs[1:]:
        if c.grid != ref.grid or c.domain != ref.domain or c.scheme != ref.scheme:
            raise ValueError("coupled configurations must share grid, domain and scheme")
    if noise.grid != ref.grid:
        raise ValueError("noise grid does not match the configuration grid")
    channels = [Channel(c.drift, c.initial) for c in cfgs]
    runner = EnsembleRunner(ref.grid, ref.domain, ref.scheme, channels, check_grid_scale=ref.check_grid_scale)
    steps = _saved_steps(ref.grid, ref.save_every)
    rec = FieldRecorder(steps, len(cfgs), 1, ref.grid.nx)
    info = runner.run(noise.seed, [noise.replica], rec, cutoff=noise.cutoff)
    st = np.asarray(steps)
    out = []
    for c in range(len(cfgs)):
        out.append(
            SolutionBundle(
                u=Field(ref.grid, st, rec.u[c][0]),
                V=Field(ref.grid, st, rec.V[0]),
                K=Field(ref.grid, st, rec.K[c][0]),
                Pu0=Field(ref.grid, st, rec.P[c][0]),
                outside=int(info.outside.get(f"channel{c}", 0)),
            )
        )
    return out


def solve(cfg: SolverConfig, noise: NoiseRealization) -> SolutionBundle:
    return solve_coupled([cfg], noise)[0]


def step(u: np.ndarray, cfg: SolverConfig, k: int, xi: np.ndarray, aux: np.ndarray | None = None) -> np.ndarray:
    """One step of the scheme for a full state u^k, given the increments xi[k] (variance dt dx).

    ``aux`` supplies the extra standard normals of the exponential scheme.
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise FloatingPointError(f"non-finite state at step {k}")
    grid = cfg.grid
    stepper = make_stepper(grid, cfg.domain, cfg.scheme)
    u2 = u.reshape(1, -1)
    out = np.empty_like(u2)
    z = (np.asarray(xi, dtype=float) / math.sqrt(grid.dt * grid.dx)).reshape(1, -1)
    if cfg.drift is not None:
        b = np.empty_like(u2)
        _DriftEval(cfg.drift)(u2, None, 0.0, b)
        tmp = np.empty_like(u2)
        stepper.drift_step(u2, b, tmp)
        noise_only = np.empty_like(u2)
        stepper.noise_step(np.zeros_like(u2), z, None if aux is None else aux.reshape(1, -1), noise_only)
        out = tmp + noise_only
    else:
        stepper.noise_step(u2, z, None if aux is None else aux.reshape(1, -1), out)
    return out[0]
