"""Monte Carlo simulation of the complex Wishart matrix diffusion.

Entries of the M x N matrix K perform independent complex Brownian motions
with <|dK_ij|^2> = dt, and L = K^dagger K.  The process starts from
K(0) = a * [Id_N; 0], so L(0) = a^2 Id.

Each trial draws from its own Philox stream keyed by (seed, trial index),
so results do not depend on batching or on the number of worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

THREADS_ENV = "WISHART_SHOCKS_THREADS"
_CHUNK = 256


@dataclass(frozen=True)
class EnsembleParams:
    N: int
    M: int
    a: float = 1.0
    tau: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.N < 1 or self.M < self.N:
            raise ValueError(f"need 1 <= N <= M, got N={self.N}, M={self.M}")
        if self.a < 0 or self.tau < 0:
            raise ValueError("a and tau must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def nu(self):
        return self.M - self.N

    @property
    def r(self):
        return self.N / self.M


@dataclass
class WishartSample:
    K: np.ndarray
    L: np.ndarray
    eigenvalues: np.ndarray
    clamped: int = 0


@dataclass
class TrialStatistics:
    n_trials: int
    eigenvalue_pool: np.ndarray
    smallest: np.ndarray
    trace_mean: float
    trace_stderr: float
    z_grid: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    acp_mean: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    acp_stderr: np.ndarray = field(default_factory=lambda: np.zeros(0))
    clamped: int = 0


@dataclass
class Histogram:
    bin_edges: np.ndarray
    lambdas: np.ndarray
    rho: np.ndarray
    mass_outside: float


def macro_to_raw_time(tau, params: EnsembleParams):
    """Raw diffusion time tau * r / N = tau / M."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return tau / params.M


def trial_rng(seed, trial):
    return np.random.Generator(np.random.Philox(key=[seed, trial]))


def _assemble(K):
    KH = np.conj(np.swapaxes(K, -1, -2))
    L = KH @ K
    L = 0.5 * (L + np.conj(np.swapaxes(L, -1, -2)))
    ev = np.linalg.eigvalsh(L)
    scale = np.maximum(np.max(np.abs(ev), axis=-1, keepdims=True), 1e-300)
    bad = ev < 0
    # heevd backward error is a few N eps ||L||; anything beyond is a genuine failure
    if np.any(ev < -1e-10 * scale):
        raise FloatingPointError("negative eigenvalue beyond round-off")
    return L, np.where(bad, 0.0, ev), int(np.count_nonzero(bad))


def init_sample(params: EnsembleParams) -> WishartSample:
    K = np.zeros((params.M, params.N), dtype=complex)
    K[np.arange(params.N), np.arange(params.N)] = params.a
    L, ev, clamped = _assemble(K)
    return WishartSample(K, L, ev, clamped)


def _increment(rng, shape, var):
    sd = np.sqrt(var / 2)
    return rng.normal(0.0, sd, shape) + 1j * rng.normal(0.0, sd, shape)


def evolve(sample: WishartSample, raw_dt, steps, rng) -> WishartSample:
    """Advance by ``steps`` increments of raw time ``raw_dt`` each (exact Gaussian)."""
    if raw_dt < 0:
        raise ValueError("raw_dt must be nonnegative")
    K = sample.K.copy()
    for _ in range(steps):
        K = K + _increment(rng, K.shape, raw_dt)
    L, ev, clamped = _assemble(K)
    return WishartSample(K, L, ev, clamped)


def evolve_path(params: EnsembleParams, raw_times, trial=0):
    """Snapshots of one trajectory at increasing raw times."""
    rng = trial_rng(params.seed, trial)
    sample = init_sample(params)
    out, t_prev = [], 0.0
    for t in raw_times:
        sample = evolve(sample, t - t_prev, 1, rng)
        out.append(sample)
        t_prev = t
    return out


def _n_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _run_chunk(params, raw_t, start, stop, z_grid):
    K0 = init_sample(params).K
    K = np.empty((stop - start,) + K0.shape, dtype=complex)
    for j, trial in enumerate(range(start, stop)):
        K[j] = K0 + _increment(trial_rng(params.seed, trial), K0.shape, raw_t)
    L, ev, clamped = _assemble(K)
    dets = None
    if z_grid.size:
        eye = np.eye(params.N)
        A = z_grid[None, :, None, None] * eye - L[:, None, :, :]
        dets = np.linalg.det(A)
    return ev, dets, clamped


def run_trials(params: EnsembleParams, n_trials, z_grid=()) -> TrialStatistics:
    """Sample L at macroscopic time params.tau for trials 0..n_trials-1."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    z_grid = np.asarray(z_grid, dtype=complex).reshape(-1)
    raw_t = macro_to_raw_time(params.tau, params)
    bounds = [(s, min(s + _CHUNK, n_trials)) for s in range(0, n_trials, _CHUNK)]
    with ThreadPoolExecutor(_n_threads()) as pool:
        parts = list(pool.map(lambda b: _run_chunk(params, raw_t, b[0], b[1], z_grid), bounds))
    ev = np.concatenate([p[0] for p in parts])
    clamped = sum(p[2] for p in parts)
    traces = ev.sum(axis=1)
    stderr = traces.std(ddof=1) / np.sqrt(n_trials) if n_trials > 1 else 0.0
    stats = TrialStatistics(n_trials, ev.reshape(-1), ev[:, 0].copy(),
                            float(traces.mean()), float(stderr), z_grid, clamped=clamped)
    if z_grid.size:
        dets = np.concatenate([p[1] for p in parts])
        stats.acp_mean = dets.mean(axis=0)
        if n_trials > 1:
            var = dets.real.var(axis=0, ddof=1) + dets.imag.var(axis=0, ddof=1)
            stats.acp_stderr = np.sqrt(var / n_trials)
        else:
            stats.acp_stderr = np.zeros(z_grid.size)
    return stats


def estimate_acp(params: EnsembleParams, z_grid, n_trials) -> TrialStatistics:
    """Sample mean and standard error of det(z - L) on ``z_grid``."""
    if n_trials < 2:
        raise ValueError("estimate_acp needs at least two trials")
    return run_trials(params, n_trials, z_grid)


def estimate_density(stats: TrialStatistics, bins, range) -> Histogram:
    """Histogram normalised against the full pool; mass outside ``range`` reported."""
    pool = np.asarray(stats.eigenvalue_pool)
    if pool.size == 0:
        raise ValueError("empty eigenvalue pool")
    counts, edges = np.histogram(pool, bins=bins, range=range)
    width = np.diff(edges)
    rho = counts / (pool.size * width)
    outside = 1.0 - counts.sum() / pool.size
    return Histogram(edges, 0.5 * (edges[1:] + edges[:-1]), rho, float(outside))


def l1_distance(hist: Histogram, bin_masses):
    """Sum over bins of |empirical mass - theoretical mass|, plus mass outside."""
    emp = hist.rho * np.diff(hist.bin_edges)
    return float(np.sum(np.abs(emp - np.asarray(bin_masses))) + hist.mass_outside)
