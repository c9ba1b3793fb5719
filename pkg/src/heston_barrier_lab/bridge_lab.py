"""Brownian bridge residuals on an observation grid.

Given B observed at coarse knots, ``Bbar`` is its piecewise-linear
interpolant and ``Bcirc = B - Bbar`` is a Brownian bridge on every coarse
cell, independent of W and of ``Bbar``.  The residual iterated integral

    I(Bcirc, W) = int B dW - int Bbar dW

is approximated by dyadic Riemann sums ``I^n`` on ``2**n`` sub-steps per cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np
from scipy import integrate
from scipy.stats import ks_2samp

from . import grid_paths as gp
from .grid_paths import TimeGrid
from .stats import mean_se

# sqrt(2/pi) * sqrt(1/6): ceiling of sqrt(N) E|I| / T from E int |Bcirc|^2 = T^2/(6N)
LYAPUNOV_CEILING = math.sqrt(2.0 / math.pi) / math.sqrt(6.0)
JENSEN_FLOOR = 0.25


@dataclass
class BridgeEnsemble:
    grid_coarse: TimeGrid
    grid_fine: TimeGrid
    B_fine: np.ndarray
    W_fine: np.ndarray | None
    Bbar: np.ndarray
    Bcirc: np.ndarray

    @property
    def level(self) -> int:
        """Dyadic refinement level n with N_fine = N_coarse * 2**n."""
        return int(round(math.log2(self.grid_fine.N // self.grid_coarse.N)))


def refinement_ratio(grid_coarse: TimeGrid, grid_fine: TimeGrid) -> int:
    if not grid_coarse.divides(grid_fine):
        raise ValueError(
            f"fine grid (N={grid_fine.N}, T={grid_fine.T}) is not a refinement of "
            f"coarse grid (N={grid_coarse.N}, T={grid_coarse.T})"
        )
    return grid_fine.N // grid_coarse.N


def linear_interpolant(path: np.ndarray, m: int) -> np.ndarray:
    """Piecewise-linear interpolation of ``path[..., ::m]`` back onto every knot."""
    coarse = path[..., ::m]
    N = coarse.shape[-1] - 1
    left = coarse[..., :-1, None]
    frac = np.arange(m) / m
    cells = left + frac * (coarse[..., 1:, None] - left)
    out = np.empty_like(path)
    out[..., :-1] = cells.reshape(path.shape[:-1] + (N * m,))
    out[..., -1] = coarse[..., -1]
    return out


def bridge_decompose(
    B_fine: np.ndarray,
    grid_coarse: TimeGrid,
    grid_fine: TimeGrid,
    W_fine: np.ndarray | None = None,
) -> BridgeEnsemble:
    """Split B (values at fine knots, B_0 = 0 included) into interpolant and bridge."""
    m = refinement_ratio(grid_coarse, grid_fine)
    B_fine = np.asarray(B_fine, dtype=float)
    if B_fine.shape[-1] != grid_fine.N + 1:
        raise ValueError("B_fine must hold values at all N_fine + 1 knots")
    Bbar = linear_interpolant(B_fine, m)
    Bcirc = B_fine - Bbar
    return BridgeEnsemble(grid_coarse, grid_fine, B_fine, W_fine, Bbar, Bcirc)


def _level_stride(ens: BridgeEnsemble, level: int | None) -> int:
    n = ens.level
    if level is None:
        return 1
    if not 0 <= level <= n:
        raise ValueError(f"level must be in [0, {n}], got {level}")
    return 2 ** (n - level)


def iterated_integral_dyadic(
    ens: BridgeEnsemble, W_fine: np.ndarray | None = None, level: int | None = None
):
    """I^n(Bcirc, W) = sum of Bcirc at left dyadic points times W increments.

    ``level`` evaluates a coarser dyadic level n' <= n on the same paths.
    """
    W = ens.W_fine if W_fine is None else np.asarray(W_fine, dtype=float)
    s = _level_stride(ens, level)
    Bc = ens.Bcirc[..., ::s]
    dW = np.diff(W[..., ::s], axis=-1)
    return np.sum(Bc[..., :-1] * dW, axis=-1)


def bridge_square_integral(ens: BridgeEnsemble, level: int | None = None):
    """Q^n: left-point dyadic Riemann sum of int |Bcirc|^2 dt."""
    s = _level_stride(ens, level)
    h = ens.grid_fine.dt * s
    Bc = ens.Bcirc[..., ::s]
    return h * np.sum(Bc[..., :-1] ** 2, axis=-1)


def linear_interp_integral(ens: BridgeEnsemble, W_fine: np.ndarray | None = None):
    """int Bbar dW as the sum of B_{t_k} dW_k and slope-weighted int (t - t_k) dW.

    The inner integrals are left-point Riemann-Stieltjes sums on the fine grid.
    """
    W = ens.W_fine if W_fine is None else np.asarray(W_fine, dtype=float)
    m = refinement_ratio(ens.grid_coarse, ens.grid_fine)
    N = ens.grid_coarse.N
    h = ens.grid_fine.dt
    Bk = ens.B_fine[..., ::m]
    dWf = np.diff(W, axis=-1)
    shape = dWf.shape[:-1] + (N, m)
    dWf = dWf.reshape(shape)
    coarse_dW = dWf.sum(axis=-1)
    inner = np.sum(np.arange(m) * h * dWf, axis=-1)
    slope = np.diff(Bk, axis=-1) / ens.grid_coarse.dt
    return np.sum(Bk[..., :-1] * coarse_dW, axis=-1) + np.sum(slope * inner, axis=-1)


def fine_ito_integral(B_fine: np.ndarray, W_fine: np.ndarray):
    """Left-point sum of int B dW on the fine grid."""
    return np.sum(B_fine[..., :-1] * np.diff(W_fine, axis=-1), axis=-1)


@dataclass(frozen=True)
class BridgeProfile:
    pointwise: Callable
    integral_of_sqrt: float
    integral_quadrature: float

    @property
    def relative_gap(self) -> float:
        return abs(self.integral_quadrature - self.integral_of_sqrt) / self.integral_of_sqrt


def bridge_l2_profile(grid: TimeGrid) -> BridgeProfile:
    """E|Bcirc_t|^2 = (t - t_k)(t_{k+1} - t)/dt and the integral of its square root.

    The integral is given in closed form, sqrt(T^3/N) * pi/8, and by adaptive
    quadrature over each cell.
    """
    dt = grid.dt

    def pointwise(t):
        t = np.asarray(t, dtype=float)
        if np.any((t < 0) | (t > grid.T)):
            raise ValueError("t outside [0, T]")
        k = np.minimum(np.floor(t / dt), grid.N - 1)
        left = k * dt
        right = np.where(k == grid.N - 1, grid.T, left + dt)
        val = np.maximum((t - left) * (right - t) / (right - left), 0.0)
        return float(val) if val.ndim == 0 else val

    closed = math.sqrt(grid.T**3 / grid.N) * math.pi / 8.0

    quad = 0.0
    for k in range(grid.N):
        left, right = k * dt, (grid.T if k == grid.N - 1 else (k + 1) * dt)
        width = right - left
        part, _ = integrate.quad(
            lambda t: math.sqrt(max((t - left) * (right - t) / width, 0.0)),
            left, right, epsabs=0.0, epsrel=1e-13, limit=200,
        )
        quad += part
    return BridgeProfile(pointwise, closed, quad)


@dataclass(frozen=True)
class DistributionIdentity:
    ks_stat: float
    mean_abs_I: float
    se_abs_I: float
    mean_I: float
    se_I: float
    mean_comparison: float
    se_comparison: float
    M: int
    N: int
    n: int
    T: float

    @property
    def scaled_mean(self) -> float:
        return math.sqrt(self.N) * self.mean_abs_I / self.T

    @property
    def scaled_se(self) -> float:
        return math.sqrt(self.N) * self.se_abs_I / self.T


@numba.njit(cache=True)
def _bridge_sums(dW, dB, m, h):
    """Per row: I^n and Q^n from fine increments, in one pass per coarse cell.

    Same quantities as ``bridge_decompose`` + ``iterated_integral_dyadic`` +
    ``bridge_square_integral`` without the intermediate path arrays.
    """
    rows, n_fine = dW.shape
    I = np.empty(rows)
    Q = np.empty(rows)
    for r in range(rows):
        left = 0.0
        acc_i = 0.0
        acc_q = 0.0
        for start in range(0, n_fine, m):
            right = left
            for j in range(m):
                right += dB[r, start + j]
            rise = right - left
            b = left
            for j in range(m):
                bc = b - (left + (j / m) * rise)
                acc_i += bc * dW[r, start + j]
                acc_q += bc * bc
                b += dB[r, start + j]
            left = right
        I[r] = acc_i
        Q[r] = h * acc_q
    return I, Q


def bridge_samples(M: int, N: int, n: int, seed: int, T: float = 1.0, threads: int = 1,
                   batch_size: int | None = None):
    """Return (I^n samples, G * sqrt(Q^n) samples), one of each per path."""
    grid_c = gp.make_grid(T, N)
    grid_f = gp.make_grid(T, N * 2**n)
    if batch_size is None:
        batch_size = gp.cache_batch(grid_f.N)

    def work(ids):
        dW, dB = gp.increments(grid_f, ids, seed)
        I, Q = _bridge_sums(dW, dB, 2**n, grid_f.dt)
        G = np.array([gp.normals(seed, pid, gp.STREAM_AUX, 1)[0] for pid in ids])
        return I, G * np.sqrt(Q)

    parts = gp.map_batches(work, M, threads, batch_size)
    I = np.concatenate([a for a, _ in parts])
    C = np.concatenate([b for _, b in parts])
    return I, C


def distribution_identity_test(
    M: int, N: int, n: int, seed: int, T: float = 1.0, threads: int = 1
) -> DistributionIdentity:
    """Compare the law of I^n(Bcirc, W) with G * sqrt(Q^n), G independent N(0, 1)."""
    if M < 1000:
        raise ValueError("M must be at least 1000")
    if n < 6:
        raise ValueError("refinement level n must be at least 6")
    I, C = bridge_samples(M, N, n, seed, T, threads)
    ks = ks_2samp(I, C).statistic
    m_abs, se_abs = mean_se(np.abs(I))
    m_I, se_I = mean_se(I)
    m_C, se_C = mean_se(C)
    return DistributionIdentity(float(ks), m_abs, se_abs, m_I, se_I, m_C, se_C, M, N, n, T)


def ks_critical(M1: int, M2: int | None = None, c_alpha: float = 1.63) -> float:
    """Asymptotic two-sample KS critical value (c_alpha = 1.63 at the 1% level)."""
    M2 = M1 if M2 is None else M2
    return c_alpha * math.sqrt((M1 + M2) / (M1 * M2))
