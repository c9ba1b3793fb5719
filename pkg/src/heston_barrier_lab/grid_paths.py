"""Equidistant time grids and reproducible Brownian driving paths.

Randomness is addressed by ``(seed, path_id, stream, index)``.  Each
``(seed, path_id, stream)`` triple keys its own PCG64DXSM stream through a
``SeedSequence``; ``advance`` jumps straight to the k-th variate, so any
variate of any path is produced without generating its predecessors and the
output never depends on how paths are split across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from ._normal import inverse_normal_inplace

STREAM_W = 0
STREAM_B = 1
STREAM_AUX = 2
STREAM_EXACT = 3

DEFAULT_BATCH = 1024


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 1):
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"T must be positive, got {self.T!r}")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def knots(self) -> np.ndarray:
        k = np.arange(self.N + 1)
        t = k * self.dt
        t[-1] = self.T
        return t

    def n_of(self, t):
        """Index of the last knot not after ``t`` (clipped to N)."""
        t = np.asarray(t, dtype=float)
        n = np.floor(t / self.dt).astype(int)
        # guard floor() against t/dt landing just below an integer
        n = np.where((n + 1) * self.dt <= t, n + 1, n)
        n = np.clip(n, 0, self.N)
        return int(n) if n.ndim == 0 else n

    def eta(self, t):
        """Grid point t_{n(t)} at or before ``t``."""
        n = self.n_of(t)
        return n * self.dt if np.ndim(n) == 0 else n * self.dt

    def divides(self, other: "TimeGrid") -> bool:
        """True if ``other`` is a refinement of this grid on the same horizon."""
        return other.T == self.T and other.N % self.N == 0


def make_grid(T: float, N: int) -> TimeGrid:
    return TimeGrid(float(T), int(N))


@dataclass(frozen=True)
class PathBundle:
    grid: TimeGrid
    dW: np.ndarray
    dB: np.ndarray
    seed_id: int

    @property
    def W(self) -> np.ndarray:
        return cumulative(self.dW)

    @property
    def B(self) -> np.ndarray:
        return cumulative(self.dB)


def cumulative(increments: np.ndarray) -> np.ndarray:
    """Path values at the knots (starting from 0) from increments along the last axis."""
    increments = np.asarray(increments, dtype=float)
    out = np.zeros(increments.shape[:-1] + (increments.shape[-1] + 1,))
    np.cumsum(increments, axis=-1, out=out[..., 1:])
    return out


def _stream(seed: int, path_id: int, stream: int) -> np.random.Generator:
    key = np.random.SeedSequence([int(seed), int(path_id), int(stream)])
    return np.random.Generator(np.random.PCG64DXSM(key))


def uniforms(seed: int, path_id: int, stream: int, n: int, start: int = 0) -> np.ndarray:
    """Variates ``start .. start+n-1`` of one stream, on the open interval (0, 1)."""
    gen = _stream(seed, path_id, stream)
    if start:
        # one 64-bit output per double
        gen.bit_generator.advance(start)
    u = gen.random(n)
    u += 2.0**-54
    return u


def normals(seed: int, path_id: int, stream: int, n: int, start: int = 0) -> np.ndarray:
    """Standard normal variates by inverse-CDF transform of :func:`uniforms`."""
    u = uniforms(seed, path_id, stream, n, start)
    inverse_normal_inplace(u)
    return u


def uniform_block(seed: int, path_ids: Sequence[int], stream: int, n: int) -> np.ndarray:
    """Stack of ``uniforms`` rows, one per path id."""
    out = np.empty((len(path_ids), n))
    for row, pid in enumerate(path_ids):
        _stream(seed, pid, stream).random(n, out=out[row])
    out += 2.0**-54
    return out


def normal_block(seed: int, path_ids: Sequence[int], stream: int, n: int) -> np.ndarray:
    """Stack of ``normals`` rows, one per path id."""
    out = uniform_block(seed, path_ids, stream, n)
    inverse_normal_inplace(out.reshape(-1))
    return out


def increments(grid: TimeGrid, path_ids: Sequence[int], seed: int):
    """Brownian increments (dW, dB) of shape ``(len(path_ids), grid.N)``."""
    scale = math.sqrt(grid.dt)
    dW = normal_block(seed, path_ids, STREAM_W, grid.N)
    dW *= scale
    dB = normal_block(seed, path_ids, STREAM_B, grid.N)
    dB *= scale
    return dW, dB


def bundle(grid: TimeGrid, seed: int, seed_id: int) -> PathBundle:
    dW, dB = increments(grid, [seed_id], seed)
    return PathBundle(grid, dW[0], dB[0], seed_id)


def sample_paths(
    grid: TimeGrid,
    path_count: int,
    seed: int,
    threads: int = 1,
    first_id: int = 0,
) -> Iterator[PathBundle]:
    """Stream of path bundles with ids ``first_id .. first_id+path_count-1``."""
    if path_count < 1:
        raise ValueError("path_count must be >= 1")
    ids = range(first_id, first_id + path_count)
    if threads <= 1:
        for pid in ids:
            yield bundle(grid, seed, pid)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(lambda pid: bundle(grid, seed, pid), ids)


def batches(path_count: int, batch_size: int = DEFAULT_BATCH) -> list[range]:
    return [
        range(lo, min(lo + batch_size, path_count))
        for lo in range(0, path_count, batch_size)
    ]


def cache_batch(n_steps: int, elements: int = 2**15) -> int:
    """Paths per batch keeping one (paths, n_steps) array cache-resident."""
    return max(1, elements // n_steps)


def step_batch(n_steps: int, elements: int = 2**21) -> int:
    """Paths per batch for time-stepping loops, where per-step overhead dominates."""
    return max(1, min(DEFAULT_BATCH, elements // n_steps))


def map_batches(
    fn: Callable[[range], object],
    path_count: int,
    threads: int = 1,
    batch_size: int = DEFAULT_BATCH,
) -> list:
    """Apply ``fn`` to consecutive path-id ranges; results come back in batch order."""
    chunks = batches(path_count, batch_size)
    if threads <= 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def coarsen_increments(dW: np.ndarray, dB: np.ndarray, N_coarse: int):
    """Sum fine increments over coarse cells (last axis)."""
    return coarsen(dW, N_coarse), coarsen(dB, N_coarse)


def coarsen(d: np.ndarray, N_coarse: int) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    N_fine = d.shape[-1]
    if N_coarse < 1 or N_fine % N_coarse:
        raise ValueError(f"N_coarse={N_coarse} does not divide N_fine={N_fine}")
    if N_coarse == N_fine:
        return d.copy()
    m = N_fine // N_coarse
    # differences of the fine path at shared knots keep coarse and fine paths
    # equal there up to rounding
    path = cumulative(d)[..., ::m]
    return np.diff(path, axis=-1)


def correlate(dW: np.ndarray, dB: np.ndarray, rho: float) -> np.ndarray:
    """Increments of Z = rho W + sqrt(1 - rho^2) B."""
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1]")
    if rho == 0.0:
        return np.array(dB, dtype=float, copy=True)
    if abs(rho) == 1.0:
        return rho * np.asarray(dW, dtype=float)
    return rho * dW + math.sqrt(1.0 - rho * rho) * dB
