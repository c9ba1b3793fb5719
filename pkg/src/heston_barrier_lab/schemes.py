"""Discrete-time schemes for the log-Heston pair (X, V).

All runners accept increments with time along the last axis, so a batch of
paths is simulated at once by passing arrays of shape ``(M, N)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincinv
from scipy.stats import ks_2samp, poisson

from . import grid_paths as gp
from .grid_paths import TimeGrid
from .model import HestonParams, cir_marginal_moments
from .stats import mean_se, variance_se


class SchemeTag(str, enum.Enum):
    EULER_FULL_TRUNCATION = "euler_full_truncation"
    DRIFT_IMPLICIT_SQRT = "drift_implicit_sqrt"


@dataclass
class SchemeTrajectory:
    grid: TimeGrid
    xhat: np.ndarray
    vhat: np.ndarray
    scheme_tag: SchemeTag
    fallback: bool = False

    @property
    def x_T(self):
        return self.xhat[..., -1]

    @property
    def v_T(self):
        return self.vhat[..., -1]


def euler_step(state, dWk, dBk, dt, p: HestonParams):
    """One full-truncation Euler step; returns the untruncated new variance."""
    x, v = state
    if dt == 0:
        return x, v
    vp = np.maximum(v, 0.0)
    sq = np.sqrt(vp)
    x_new = x + (p.mu - 0.5 * vp) * dt + sq * (p.rho * dWk + p.rho_bar * dBk)
    v_new = v + p.kappa * (p.theta - vp) * dt + p.sigma * sq * dWk
    return x_new, v_new


def _check_increments(grid: TimeGrid, dW, dB):
    dW = np.asarray(dW, dtype=float)
    dB = np.asarray(dB, dtype=float)
    if dW.shape != dB.shape or dW.shape[-1] != grid.N:
        raise ValueError(
            f"increment arrays of shape {dW.shape} and {dB.shape} do not match N={grid.N}"
        )
    return dW, dB


def run_euler(p: HestonParams, grid: TimeGrid, dW, dB) -> SchemeTrajectory:
    dW, dB = _check_increments(grid, dW, dB)
    shape = dW.shape[:-1] + (grid.N + 1,)
    xhat = np.empty(shape)
    vhat = np.empty(shape)
    xhat[..., 0] = p.x0
    vhat[..., 0] = p.v0
    dt = grid.dt
    x, v = xhat[..., 0], vhat[..., 0]
    for k in range(grid.N):
        x, v = euler_step((x, v), dW[..., k], dB[..., k], dt, p)
        xhat[..., k + 1] = x
        vhat[..., k + 1] = v
    return SchemeTrajectory(grid, xhat, vhat, SchemeTag.EULER_FULL_TRUNCATION)


def drift_implicit_sqrt_step(u, dWk, dt, p: HestonParams):
    """Drift-implicit Euler step for U = sqrt(V), solved in closed form.

    Returns the positive root u' of
    ``u' = u + (c/u' - kappa u'/2) dt + sigma/2 dW`` with c = kappa theta/2 - sigma^2/8.
    """
    if dt == 0:
        return u
    c = p.lamperti_drift
    if not c > 0:
        p.require_lamperti()
    denom = 1.0 + 0.5 * p.kappa * dt
    a = (u + 0.5 * p.sigma * dWk) / (2.0 * denom)
    b = c * dt / denom
    r = np.sqrt(a * a + b)
    # for a < 0 the sum a + r cancels; the conjugate form b / (r - a) does not
    return np.where(a >= 0, a + r, b / (r - a))


def run_reference(p: HestonParams, grid_fine: TimeGrid, dW, dB) -> SchemeTrajectory:
    """Fine-grid strong reference.

    V comes from the drift-implicit square-root scheme, X from left-point
    log-Euler using the (positive) reference variance.  For nu <= 1/2 the
    implicit scheme is unavailable and full-truncation Euler is returned with
    ``fallback=True``.
    """
    dW, dB = _check_increments(grid_fine, dW, dB)
    if not p.nu > 0.5:
        traj = run_euler(p, grid_fine, dW, dB)
        traj.fallback = True
        return traj
    shape = dW.shape[:-1] + (grid_fine.N + 1,)
    xhat = np.empty(shape)
    vhat = np.empty(shape)
    xhat[..., 0] = p.x0
    vhat[..., 0] = p.v0
    dt = grid_fine.dt
    x = xhat[..., 0]
    u = np.full(shape[:-1], math.sqrt(p.v0))
    for k in range(grid_fine.N):
        v = u * u
        x = x + (p.mu - 0.5 * v) * dt + u * (p.rho * dW[..., k] + p.rho_bar * dB[..., k])
        u = drift_implicit_sqrt_step(u, dW[..., k], dt, p)
        xhat[..., k + 1] = x
        vhat[..., k + 1] = u * u
    return SchemeTrajectory(grid_fine, xhat, vhat, SchemeTag.DRIFT_IMPLICIT_SQRT)


def run_scheme(name: str, p: HestonParams, grid: TimeGrid, dW, dB) -> SchemeTrajectory:
    if name == "euler":
        return run_euler(p, grid, dW, dB)
    if name == "reference":
        return run_reference(p, grid, dW, dB)
    raise ValueError(f"unknown scheme {name!r}; expected 'euler' or 'reference'")


def cir_exact_transition(v, dt, p: HestonParams, u1, u2):
    """Exact draw of V_{t+dt} given V_t = v from two uniforms.

    Noncentral chi-square transition sampled as a Poisson-mixed Gamma:
    ``K = Poisson^{-1}(u1; lam/2)``, ``G = Gamma^{-1}(u2; d/2 + K, scale 2)``,
    result ``scale * G``.
    """
    if dt == 0:
        return v
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("v must be nonnegative")
    e = math.exp(-p.kappa * dt)
    scale = p.sigma**2 * (1.0 - e) / (4.0 * p.kappa)
    d = 4.0 * p.kappa * p.theta / p.sigma**2
    lam = v * e / scale
    K = poisson.ppf(u1, 0.5 * lam)
    K = np.where(lam > 0, K, 0.0)
    G = 2.0 * gammaincinv(0.5 * d + K, u2)
    return scale * G


@dataclass(frozen=True)
class MarginalCheck:
    """Exact-sampler moments at T against closed forms, and reference-vs-exact KS."""

    M: int
    N_f: int
    mean: float
    mean_se: float
    mean_target: float
    var: float
    var_se: float
    var_target: float
    ks_stat: float
    reference_mean: float
    reference_mean_se: float


def exact_terminal_samples(p: HestonParams, M: int, seed: int, threads: int = 1) -> np.ndarray:
    """V_T drawn exactly from V_0 = v0, one pair of uniforms per path."""

    def work(ids):
        u = gp.uniform_block(seed, ids, gp.STREAM_EXACT, 2)
        return cir_exact_transition(np.full(len(ids), p.v0), p.T, p, u[:, 0], u[:, 1])

    return np.concatenate(gp.map_batches(work, M, threads, batch_size=4096))


def reference_terminal_samples(
    p: HestonParams, M: int, N_f: int, seed: int, threads: int = 1
) -> np.ndarray:
    grid = gp.make_grid(p.T, N_f)

    def work(ids):
        dW = gp.normal_block(seed, ids, gp.STREAM_W, N_f) * math.sqrt(grid.dt)
        # B does not enter the variance recursion
        return run_reference(p, grid, dW, np.zeros_like(dW)).v_T

    return np.concatenate(gp.map_batches(work, M, threads, gp.step_batch(N_f)))


def marginal_check(
    p: HestonParams, M: int, N_f: int = 2**12, seed: int = 0, threads: int = 1
) -> MarginalCheck:
    exact = exact_terminal_samples(p, M, seed, threads)
    ref = reference_terminal_samples(p, M, N_f, seed, threads)
    m_target, v_target = cir_marginal_moments(p, p.T)
    mean, mean_err = mean_se(exact)
    var, var_err = variance_se(exact)
    ref_mean, ref_err = mean_se(ref)
    ks = ks_2samp(exact, ref).statistic
    return MarginalCheck(
        M, N_f, mean, mean_err, m_target, var, var_err, v_target, float(ks), ref_mean, ref_err
    )
