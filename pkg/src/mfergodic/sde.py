"""Euler-Maruyama simulation of dX = A(X) dt + sqrt(2) dW under grid drifts,
with time-averaged ergodic cost and stationary histograms.

Every path owns a counter-based Philox stream keyed by (seed, path index), so
adding paths never changes existing ones and any grouping of paths across
worker threads yields bit-identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product as iproduct

import numpy as np

from .errors import InstabilityError, InvalidGridError
from .grid import DensityField, ScalarField, UniformGrid, _same_grid
from .meanfield import MeanFieldGroundState, optimal_drift
from .nparticle import NParticleGroundState
from .potentials import MeanFieldPotential, evaluate

MIN_BLOCKS = 16
OVERFLOW_LIMIT = 1e150  # |X| beyond this counts as a diverged path


@dataclass(frozen=True)
class SimConfig:
    dt: float = 2e-3
    T: float = 40.0
    burn_in: float = 5.0
    n_paths: int = 1024
    seed: int = 0
    initial: str = "point"
    x0: float | tuple[float, ...] = 0.0
    bins: int = 256
    thin: int | None = None
    blocks: int = MIN_BLOCKS
    threads: int = 1
    chunk: int = 512
    max_discard: float = 0.01

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 <= self.burn_in < self.T:
            raise ValueError(f"need 0 <= burn_in < T, got burn_in={self.burn_in}, T={self.T}")
        if self.blocks < MIN_BLOCKS:
            raise ValueError(f"at least {MIN_BLOCKS} path blocks are required, got {self.blocks}")
        if self.n_paths < self.blocks:
            raise ValueError(f"n_paths ({self.n_paths}) must be >= blocks ({self.blocks})")
        if self.initial not in ("point", "density"):
            raise ValueError(f"initial must be 'point' or 'density', got {self.initial!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.bins < 2:
            raise ValueError("need at least two histogram bins")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def burn_steps(self) -> int:
        return int(round(self.burn_in / self.dt))

    @property
    def thin_steps(self) -> int:
        return self.thin if self.thin else max(1, int(round(0.1 / self.dt)))


@dataclass(frozen=True, eq=False)
class TrajectoryStats:
    J_hat: float
    stderr: float
    histogram: DensityField
    probabilities: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)
    n_samples: int
    n_paths: int
    n_discarded: int = 0
    block_means: np.ndarray | None = field(default=None, repr=False)
    tv: float | None = None
    variance: float | None = None


def path_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


class _GridSampler:
    """Clamped multilinear interpolation of several fields at once."""

    def __init__(self, grid: UniformGrid, fields: list[np.ndarray]):
        self.grid = grid
        self.lo = np.asarray(grid.lower)
        self.hi = np.asarray(grid.upper)
        self.h = np.asarray(grid.spacing)
        self.n = np.asarray(grid.points)
        self.values = np.stack([np.asarray(f, dtype=float).ravel() for f in fields])
        strides = np.cumprod([1, *grid.points[::-1]])[:-1][::-1]
        self.strides = np.asarray(strides)
        self.corners = [np.asarray(c) for c in iproduct((0, 1), repeat=grid.dims)]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        t = (np.clip(X, self.lo, self.hi) - self.lo) / self.h
        idx = np.minimum(t.astype(np.int64), self.n - 2)
        frac = t - idx
        base = idx @ self.strides
        out = np.zeros((self.values.shape[0], X.shape[0]))
        for c in self.corners:
            w = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
            out += w * self.values[:, base + int(c @ self.strides)]
        return out


def _inverse_cdf_sample(rho: ScalarField, u: np.ndarray) -> np.ndarray:
    from .diagnostics import quantiles

    return quantiles(rho, u)


def _bin_probabilities(rho_ref: ScalarField, edges: np.ndarray) -> np.ndarray:
    from .diagnostics import _cdf

    F = np.interp(edges, rho_ref.grid.coords(0), _cdf(rho_ref), left=0.0, right=1.0)
    return np.diff(F)


def _histogram_stats(counts: np.ndarray, edges: np.ndarray):
    total = int(counts.sum())
    if total == 0:
        raise ValueError("no samples recorded; a histogram needs at least one sample")
    prob = counts / total
    centres = 0.5 * (edges[1:] + edges[:-1])
    grid = UniformGrid.line(centres[0], centres[-1], len(centres))
    hist = DensityField.normalized(grid, prob / np.diff(edges))
    return prob, hist, total


def tv_from_histogram(prob: np.ndarray, edges: np.ndarray, rho_ref: ScalarField) -> float:
    return 0.5 * float(np.sum(np.abs(prob - _bin_probabilities(rho_ref, edges))))


def stats_from_samples(samples, lower: float, upper: float, bins: int = 256, rho_ref=None) -> TrajectoryStats:
    """Histogram statistics of given 1-D samples (no dynamics)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no samples given; statistics of an empty sample are undefined")
    edges = np.linspace(lower, upper, bins + 1)
    idx = np.clip(((x - lower) / (edges[1] - edges[0])).astype(np.int64), 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    prob, hist, total = _histogram_stats(counts, edges)
    tv = tv_from_histogram(prob, edges, rho_ref) if rho_ref is not None else None
    return TrajectoryStats(math.nan, math.nan, hist, prob, edges, total, 0, tv=tv, variance=float(np.var(x)))


def sample_density(rho: ScalarField, n: int, seed: int = 0) -> np.ndarray:
    """n draws from a 1-D grid density via per-draw Philox streams and inverse CDF."""
    u = np.array([path_generator(seed, i).random() for i in range(n)])
    return _inverse_cdf_sample(rho, u)


def _healthy(X: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return (np.abs(X) < OVERFLOW_LIMIT).all(axis=1)


def _simulate_group(paths, sampler, dims, cfg, x_init, pooled_axis_lo, edges, has_cost):
    """Run one contiguous group of paths; returns per-path cost sums, bin counts, alive mask."""
    n = len(paths)
    gens = [path_generator(cfg.seed, int(i)) for i in paths]
    X = np.array(x_init, dtype=float).reshape(n, dims)
    sq = math.sqrt(2.0 * cfg.dt)
    acc = np.zeros(n)
    m2 = np.zeros(n)
    counts = np.zeros(cfg.bins, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    bw = edges[1] - edges[0]
    steps, burn, thin = cfg.steps, cfg.burn_steps, cfg.thin_steps
    done = 0
    while done < steps:
        m = min(cfg.chunk, steps - done)
        noise = np.stack([g.standard_normal((m, dims)) for g in gens], axis=1)
        for j in range(m):
            vals = sampler(X)
            X = X + vals[:dims].T * cfg.dt + sq * noise[j]
            step = done + j + 1
            if step > burn:
                if has_cost:
                    acc += sampler(X)[dims]
                if (step - burn) % thin == 0:
                    ok = _healthy(X) & alive
                    b = np.clip((X[ok] - pooled_axis_lo) / bw, 0, cfg.bins - 1).astype(np.int64)
                    counts += np.bincount(b.ravel(), minlength=cfg.bins)
                    m2 += np.where(ok, np.sum(np.where(ok[:, None], X, 0.0) ** 2, axis=1), 0.0)
        done += m
        bad = ~_healthy(X)
        if bad.any():
            alive &= ~bad
            X[bad] = 0.0
    return acc, counts, alive, m2


def _run(sampler, dims, cfg, x_init, box_lo, box_hi, has_cost, rho_ref):
    n = cfg.n_paths
    edges = np.linspace(box_lo, box_hi, cfg.bins + 1)
    groups = np.array_split(np.arange(n), max(1, cfg.threads))
    starts = [x_init[g[0] : g[-1] + 1] for g in groups]
    args = [(g, sampler, dims, cfg, s, box_lo, edges, has_cost) for g, s in zip(groups, starts)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(lambda a: _simulate_group(*a), args))
    else:
        parts = [_simulate_group(*a) for a in args]
    acc = np.concatenate([p[0] for p in parts])
    counts = sum((p[1] for p in parts), np.zeros(cfg.bins, dtype=np.int64))
    alive = np.concatenate([p[2] for p in parts])
    m2 = np.concatenate([p[3] for p in parts])

    discarded = int((~alive).sum())
    if discarded > cfg.max_discard * n:
        raise InstabilityError(
            f"{discarded} of {n} paths diverged; reduce dt (currently {cfg.dt:g})"
        )
    n_avg = cfg.steps - cfg.burn_steps
    per_path = acc / n_avg
    block_means = np.array(
        [per_path[b][alive[b]].mean() for b in np.array_split(np.arange(n), cfg.blocks)]
    )
    J = float(np.mean(block_means)) if has_cost else math.nan
    se = float(np.std(block_means, ddof=1) / math.sqrt(cfg.blocks)) if has_cost else math.nan
    prob, hist, total = _histogram_stats(counts, edges)
    tv = tv_from_histogram(prob, edges, rho_ref) if rho_ref is not None else None
    records = max(1, (cfg.steps - cfg.burn_steps) // cfg.thin_steps)
    var = float(np.sum(m2[alive]) / (alive.sum() * records * dims))
    return TrajectoryStats(J, se, hist, prob, edges, total, n, discarded, block_means, tv, var)


def _initial_states(cfg: SimConfig, dims: int, rho_ref: ScalarField | None) -> np.ndarray:
    if cfg.initial == "point":
        x0 = np.broadcast_to(np.asarray(cfg.x0, dtype=float), (dims,))
        return np.tile(x0, (cfg.n_paths, 1))
    if rho_ref is None:
        raise ValueError("initial='density' needs a reference density")
    # a separate key space (seed ^ 1<<63) keeps the initial draws off the noise streams
    draws = sample_density(rho_ref, cfg.n_paths * dims, seed=cfg.seed ^ (1 << 63))
    return draws.reshape(cfg.n_paths, dims)


def _check_dt(cfg: SimConfig, grid: UniformGrid):
    width = min(b - a for a, b in zip(grid.lower, grid.upper))
    if cfg.dt > 1e-2 * width:
        raise ValueError(f"dt={cfg.dt:g} exceeds 1e-2 x box width ({width:g})")


def simulate_meanfield(
    drift, config: SimConfig, cost: ScalarField | None = None, rho_ref: ScalarField | None = None
) -> TrajectoryStats:
    """Controlled one-particle dynamics with drift sampled on a one-axis grid."""
    fields = drift if isinstance(drift, (list, tuple)) else [drift]
    grid = fields[0].grid
    if grid.dims != 1 or len(fields) != 1:
        raise InvalidGridError("mean-field simulation expects one drift on a one-axis grid")
    _check_dt(config, grid)
    stack = [fields[0].values]
    if cost is not None:
        _same_grid(cost.grid, grid, "cost and drift")
        stack.append(cost.values)
    sampler = _GridSampler(grid, stack)
    x_init = _initial_states(config, 1, rho_ref)
    return _run(sampler, 1, config, x_init, grid.lower[0], grid.upper[0], cost is not None, rho_ref)


def simulate_nparticle(
    drifts, config: SimConfig, cost: ScalarField | None = None, rho_ref: ScalarField | None = None
) -> TrajectoryStats:
    """Joint N-particle dynamics; the histogram pools all particle coordinates."""
    grid = drifts[0].grid
    N = grid.dims
    if len(drifts) != N:
        raise InvalidGridError(f"expected {N} drift components, got {len(drifts)}")
    if N > 4:
        raise InvalidGridError("at most four particles are supported")
    _check_dt(config, grid)
    stack = [d.values for d in drifts]
    if cost is not None:
        _same_grid(cost.grid, grid, "cost and drift")
        stack.append(cost.values)
    sampler = _GridSampler(grid, stack)
    x_init = _initial_states(config, N, rho_ref)
    return _run(sampler, N, config, x_init, grid.lower[0], grid.upper[0], cost is not None, rho_ref)


def meanfield_cost(state: MeanFieldGroundState, potential: MeanFieldPotential) -> ScalarField:
    """|alpha|^2/2 + V(x, rho0) with the measure argument frozen at rho0."""
    a = state.drift[0].values
    return ScalarField(state.grid, 0.5 * a * a + evaluate(potential, state.rho0).values)


def nparticle_cost(state: NParticleGroundState) -> ScalarField:
    """(1/N) (sum_i |A^i|^2 / 2 + V_N), the per-particle running cost."""
    drifts = optimal_drift(state.rhoN)
    kin = sum(0.5 * d.values**2 for d in drifts)
    return ScalarField(state.grid, (kin + state.VN.values) / state.N)


def stationarity_check(stats: TrajectoryStats, rho_ref: ScalarField) -> float:
    return tv_from_histogram(stats.probabilities, stats.edges, rho_ref)
