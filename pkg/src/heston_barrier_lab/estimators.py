"""Conditional-expectation estimators and the bridge decomposition of X_T.

Stochastic integrals are left-point (Ito) sums throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from . import grid_paths as gp
from .grid_paths import TimeGrid
from .model import HestonParams
from .schemes import SchemeTrajectory, run_reference
from .stats import mean_se

V_FLOOR = 1e-12


def _with_origin(knots) -> np.ndarray:
    knots = np.asarray(knots, dtype=float)
    zero = np.zeros(knots.shape[:-1] + (1,))
    return np.concatenate([zero, knots], axis=-1)


def _check_knots(W_knots, B_knots):
    W_knots = np.asarray(W_knots, dtype=float)
    B_knots = np.asarray(B_knots, dtype=float)
    if W_knots.shape != B_knots.shape:
        raise ValueError(f"knot arrays differ in shape: {W_knots.shape} vs {B_knots.shape}")
    return _with_origin(W_knots), _with_origin(B_knots)


def clark_cameron_estimate(W_knots, B_knots):
    """E[int_0^1 W dB | W, B at the grid knots].

    ``W_knots``/``B_knots`` hold the values at t_1..t_N (the zero at t_0 is
    implied).  Per cell the estimate is W_k dB_k + dW_k dB_k / 2.
    """
    W, B = _check_knots(W_knots, B_knots)
    dW = np.diff(W, axis=-1)
    dB = np.diff(B, axis=-1)
    return np.sum((W[..., :-1] + 0.5 * dW) * dB, axis=-1)


def left_point_estimate(W_knots, B_knots):
    """Plain Ito sum of W_k dB_k on the grid data; a suboptimal competitor."""
    W, B = _check_knots(W_knots, B_knots)
    return np.sum(W[..., :-1] * np.diff(B, axis=-1), axis=-1)


@dataclass(frozen=True)
class ClarkCameronRow:
    N: int
    M: int
    estimate: float
    std_error: float
    target: float
    left_point_rms: float
    left_point_se: float

    @property
    def relative_deviation(self) -> float:
        return abs(self.estimate - self.target) / self.target

    def passed(self, n_se: float = 3.0, rel_tol: float = 0.02) -> bool:
        return (
            abs(self.estimate - self.target) <= n_se * self.std_error
            and self.relative_deviation <= rel_tol
        )


def _rms_from_squares(sq, offset: float = 0.0):
    mse, se_mse = mean_se(sq)
    rms = math.sqrt(mse + offset)
    return rms, se_mse / (2.0 * rms)


def clark_cameron_table(
    N_list, M: int, N_f: int = 2**12, seed: int = 0, threads: int = 1
) -> list[ClarkCameronRow]:
    """RMS error of the Clark-Cameron estimator against a coupled fine-grid proxy.

    The proxy is the same conditional expectation on the N_f grid.  The coarse
    sigma-field is contained in the fine one, so the coarse error splits
    orthogonally and E|X - CC_N|^2 = E|CC_f - CC_N|^2 + 1/(4 N_f) exactly;
    the reported RMS adds that known fine-level term back.
    """
    N_list = [int(N) for N in N_list]
    grid_f = gp.make_grid(1.0, N_f)
    for N in N_list:
        if N_f % N:
            raise ValueError(f"N={N} does not divide N_f={N_f}")

    def work(ids):
        dW, dB = gp.increments(grid_f, ids, seed)
        W, B = gp.cumulative(dW), gp.cumulative(dB)
        ref = clark_cameron_estimate(W[..., 1:], B[..., 1:])
        out = []
        for N in N_list:
            s = N_f // N
            Wk, Bk = W[..., s::s], B[..., s::s]
            out.append(
                (
                    (clark_cameron_estimate(Wk, Bk) - ref) ** 2,
                    (left_point_estimate(Wk, Bk) - ref) ** 2,
                )
            )
        return out

    parts = gp.map_batches(work, M, threads, gp.cache_batch(N_f))
    rows = []
    for i, N in enumerate(N_list):
        cc = np.concatenate([p[i][0] for p in parts])
        lp = np.concatenate([p[i][1] for p in parts])
        rms, se = _rms_from_squares(cc, 0.25 / N_f)
        lp_rms, lp_se = _rms_from_squares(lp, 0.25 / N_f)
        rows.append(ClarkCameronRow(N, M, rms, se, 0.5 / math.sqrt(N), lp_rms, lp_se))
    return rows


@dataclass
class DecompositionParts:
    Y_T: np.ndarray
    A_path: np.ndarray
    a_path: np.ndarray
    U_path: np.ndarray
    int_A_dB: np.ndarray
    int_B_dW: np.ndarray
    X_T_reconstructed: np.ndarray
    B_path: np.ndarray
    grid: TimeGrid


def decompose_X(
    p: HestonParams,
    fine_traj: SchemeTrajectory,
    dW,
    dB,
    v_floor: float = V_FLOOR,
) -> DecompositionParts:
    """Split X_T into a part measurable w.r.t. (W, B on the grid) and two stochastic integrals.

    X_T = Y_T + rho_bar int A dB - (sigma/2) rho_bar int B dW, where A is the
    absolutely continuous part of sqrt(V) and Y_T collects the remaining terms.
    """
    p.require_lamperti()
    grid = fine_traj.grid
    dW = np.asarray(dW, dtype=float)
    dB = np.asarray(dB, dtype=float)
    V = fine_traj.vhat
    U = np.sqrt(np.maximum(V, 0.0))
    alive = V > v_floor
    safe_U = np.where(alive, U, 1.0)
    a = np.where(alive, p.lamperti_drift / safe_U - 0.5 * p.kappa * U, 0.0)
    A = cumulative_trapezoid(a, dx=grid.dt, axis=-1, initial=0.0)
    int_V = trapezoid(V, dx=grid.dt, axis=-1)
    Bp = gp.cumulative(dB)
    int_A_dB = np.sum(A[..., :-1] * dB, axis=-1)
    int_B_dW = np.sum(Bp[..., :-1] * dW, axis=-1)
    V_T, A_T, B_T, U_T = V[..., -1], A[..., -1], Bp[..., -1], U[..., -1]
    rb = p.rho_bar
    Y_T = (
        p.x0
        + (p.rho / p.sigma) * (V_T - p.v0 - p.kappa * p.theta * p.T)
        + p.mu * p.T
        + (p.rho * p.kappa / p.sigma - 0.5) * int_V
        + rb * (U_T * B_T - A_T * B_T)
    )
    X_rec = reconstruct(p, Y_T, int_A_dB, int_B_dW)
    return DecompositionParts(Y_T, A, a, U, int_A_dB, int_B_dW, X_rec, Bp, grid)


def reconstruct(p: HestonParams, Y_T, int_A_dB, int_B_dW):
    rb = p.rho_bar
    return Y_T + rb * int_A_dB - 0.5 * p.sigma * rb * int_B_dW


def riemann_A_dB(parts: DecompositionParts, grid_coarse: TimeGrid, dB_coarse):
    """Sum of A_{t_i} (B_{t_{i+1}} - B_{t_i}) over the coarse knots."""
    if not grid_coarse.divides(parts.grid):
        raise ValueError("coarse grid is not nested in the decomposition grid")
    m = parts.grid.N // grid_coarse.N
    A_c = parts.A_path[..., ::m]
    return np.sum(A_c[..., :-1] * np.asarray(dB_coarse, dtype=float), axis=-1)


@dataclass(frozen=True)
class GapRow:
    N: int
    M: int
    estimate: float
    std_error: float


def reconstruction_gaps(
    p: HestonParams, N_f_list, M: int, seed: int = 0, threads: int = 1
) -> list[GapRow]:
    """E|X_T(fine reference) - X_T_reconstructed| for each fine resolution.

    Paths are drawn once at the finest resolution and aggregated to the others.
    """
    p.require_lamperti()
    N_f_list = sorted(int(n) for n in N_f_list)
    N_max = N_f_list[-1]
    grid_max = gp.make_grid(p.T, N_max)

    def work(ids):
        dW, dB = gp.increments(grid_max, ids, seed)
        out = []
        for N_f in N_f_list:
            g = gp.make_grid(p.T, N_f)
            dWc, dBc = gp.coarsen_increments(dW, dB, N_f)
            traj = run_reference(p, g, dWc, dBc)
            parts = decompose_X(p, traj, dWc, dBc)
            out.append(np.abs(traj.x_T - parts.X_T_reconstructed))
        return out

    chunks = gp.map_batches(work, M, threads, batch_size=gp.step_batch(N_max))
    rows = []
    for i, N_f in enumerate(N_f_list):
        m, se = mean_se(np.concatenate([c[i] for c in chunks]))
        rows.append(GapRow(N_f, M, m, se))
    return rows


def riemann_gaps(
    p: HestonParams, N_list, N_f: int, M: int, seed: int = 0, threads: int = 1
) -> list[GapRow]:
    """E|int A dB - coarse Riemann sum| with the integral taken on the N_f grid."""
    p.require_lamperti()
    grid_f = gp.make_grid(p.T, N_f)
    N_list = [int(n) for n in N_list]

    def work(ids):
        dW, dB = gp.increments(grid_f, ids, seed)
        traj = run_reference(p, grid_f, dW, dB)
        parts = decompose_X(p, traj, dW, dB)
        out = []
        for N in N_list:
            dBc = gp.coarsen(dB, N)
            approx = riemann_A_dB(parts, gp.make_grid(p.T, N), dBc)
            out.append(np.abs(parts.int_A_dB - approx))
        return out

    chunks = gp.map_batches(work, M, threads, batch_size=gp.step_batch(N_f))
    rows = []
    for i, N in enumerate(N_list):
        m, se = mean_se(np.concatenate([c[i] for c in chunks]))
        rows.append(GapRow(N, M, m, se))
    return rows
