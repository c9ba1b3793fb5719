"""Coupled Monte Carlo estimates of the strong L1 error at T and order fits.

The coarse scheme consumes the aggregated increments of the same fine path
that drives the reference, so ``|coarse - reference|`` at T is a per-path
sample of the strong error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import grid_paths as gp
from .bridge_lab import JENSEN_FLOOR, LYAPUNOV_CEILING, distribution_identity_test
from .model import HestonParams
from .schemes import run_scheme
from .stats import mean_se

DEFAULT_STEPS = (16, 32, 64, 128, 256, 512)
DEFAULT_FINE = 2**12
MIN_PATHS = 1000
MIN_REFINEMENT = 8


@dataclass(frozen=True)
class ErrorReport:
    N: int
    M: int
    err_x: float
    err_v: float
    err_l1: float
    se_x: float
    se_v: float
    se_l1: float
    N_f: int


def coupled_abs_errors(
    p: HestonParams, N_list, dW_fine, dB_fine, reference: str = "reference", scheme: str = "euler"
):
    """Per-path |x_N - X_ref| and |v_N - V_ref| at T for each coarse N.

    Returns a list of ``(abs_dx, abs_dv)`` pairs aligned with ``N_list``.
    """
    N_f = dW_fine.shape[-1]
    ref = run_scheme(reference, p, gp.make_grid(p.T, N_f), dW_fine, dB_fine)
    out = []
    for N in N_list:
        dWc, dBc = gp.coarsen_increments(dW_fine, dB_fine, N)
        coarse = run_scheme(scheme, p, gp.make_grid(p.T, N), dWc, dBc)
        out.append((np.abs(coarse.x_T - ref.x_T), np.abs(coarse.v_T - ref.v_T)))
    return out


def strong_errors(
    p: HestonParams,
    N_list,
    N_f: int = DEFAULT_FINE,
    M: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    reference: str = "reference",
    scheme: str = "euler",
) -> list[ErrorReport]:
    """Strong errors of ``scheme`` for several N on one shared set of paths."""
    N_list = [int(N) for N in N_list]
    for N in N_list:
        if N_f % N:
            raise ValueError(f"N={N} does not divide N_f={N_f}")
        if N_f // N < MIN_REFINEMENT:
            raise ValueError(f"N_f/N must be at least {MIN_REFINEMENT} (N={N}, N_f={N_f})")
    if M < MIN_PATHS:
        raise ValueError(f"M must be at least {MIN_PATHS}")
    grid_f = gp.make_grid(p.T, N_f)

    def work(ids):
        dW, dB = gp.increments(grid_f, ids, seed)
        return coupled_abs_errors(p, N_list, dW, dB, reference, scheme)

    chunks = gp.map_batches(work, M, threads, batch_size=gp.step_batch(N_f))
    reports = []
    for i, N in enumerate(N_list):
        dx = np.concatenate([c[i][0] for c in chunks])
        dv = np.concatenate([c[i][1] for c in chunks])
        ex, sx = mean_se(dx)
        ev, sv = mean_se(dv)
        el, sl = mean_se(dx + dv)
        reports.append(ErrorReport(N, M, ex, ev, el, sx, sv, sl, N_f))
    return reports


def strong_error(
    p: HestonParams, N: int, N_f: int = DEFAULT_FINE, M: int = 100_000, seed: int = 0,
    threads: int = 1,
) -> ErrorReport:
    return strong_errors(p, [N], N_f, M, seed, threads)[0]


@dataclass(frozen=True)
class RateFit:
    points: tuple
    slope: float
    intercept: float
    r_squared: float
    expected_order: float | None = None


def fit_points(points, expected_order: float | None = None) -> RateFit:
    """Least-squares order from (log N, log err) points; slope = -d log err / d log N."""
    pts = tuple((float(a), float(b)) for a, b in points)
    if len(pts) < 4:
        raise ValueError("at least 4 points are needed for a rate fit")
    if len({a for a, _ in pts}) != len(pts):
        raise ValueError("rate fit needs distinct N values")
    x = np.array([a for a, _ in pts])
    y = np.array([b for _, b in pts])
    res = stats.linregress(x, y)
    return RateFit(pts, -float(res.slope), float(res.intercept), float(res.rvalue**2), expected_order)


def euler_expected_order(nu: float) -> float:
    return min(nu / 2.0, 0.5)


def fit_rate(reports, component: str = "l1", nu: float | None = None) -> RateFit:
    """Fit the convergence order of ``err_<component>`` over the reports."""
    attr = f"err_{component}"
    points = [(math.log(r.N), math.log(getattr(r, attr))) for r in reports]
    expected = None if nu is None else euler_expected_order(nu)
    return fit_points(points, expected)


def running_slopes(reports, component: str = "l1") -> list[float]:
    """Order fitted on the first k points, NaN until 2 points are available."""
    out = []
    for k in range(1, len(reports) + 1):
        if k < 2:
            out.append(float("nan"))
            continue
        x = np.log([r.N for r in reports[:k]])
        y = np.log([getattr(r, f"err_{component}") for r in reports[:k]])
        out.append(-float(np.polyfit(x, y, 1)[0]))
    return out


def barrier_constant(p: HestonParams) -> float:
    """c = sigma T / 8 * sqrt(1 - rho^2), the floor constant of sqrt(N) e_X(N)."""
    return p.sigma * p.T / 8.0 * p.rho_bar


def check_barrier_regime(p: HestonParams) -> None:
    p.require_lamperti()
    p.require_imperfect_correlation()


@dataclass(frozen=True)
class BarrierRow:
    N: int
    floor: float
    report: ErrorReport
    bridge_scaled: float = float("nan")
    bridge_se: float = float("nan")
    bridge_bracket: tuple = field(default=(JENSEN_FLOOR, LYAPUNOV_CEILING))

    @property
    def ratio(self) -> float:
        return self.report.err_x / self.floor

    @property
    def ratio_lower(self) -> float:
        """1 - 3 relative standard errors: the smallest acceptable ratio."""
        return 1.0 - 3.0 * self.report.se_x / self.report.err_x

    @property
    def floor_ok(self) -> bool:
        return self.ratio >= self.ratio_lower

    @property
    def bridge_ok(self) -> bool:
        lo, hi = self.bridge_bracket
        return lo <= self.bridge_scaled <= hi


def barrier_table(
    p: HestonParams,
    N_list=DEFAULT_STEPS,
    N_f: int = DEFAULT_FINE,
    M: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    bridge_paths: int = 0,
    refine: int = 6,
    reports: list[ErrorReport] | None = None,
) -> list[BarrierRow]:
    """Measured Euler X-error against the floor c N^{-1/2}, per N.

    ``bridge_paths > 0`` adds the bridge quantity sqrt(N) E|I^n| / T with
    ``bridge_paths`` samples at refinement level ``refine``.
    """
    check_barrier_regime(p)
    c = barrier_constant(p)
    if reports is None:
        reports = strong_errors(p, N_list, N_f, M, seed, threads)
    rows = []
    for r in reports:
        scaled = se = float("nan")
        if bridge_paths:
            ident = distribution_identity_test(bridge_paths, r.N, refine, seed, p.T, threads)
            scaled, se = ident.scaled_mean, ident.scaled_se
        rows.append(BarrierRow(r.N, c / math.sqrt(r.N), r, scaled, se))
    return rows


def alpha_table(nu: float, eps: float) -> float:
    """Best known CIR approximation order alpha(nu, eps) (annotation only)."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    if not 0 < eps < min(nu, 0.5):
        raise ValueError("eps must lie in (0, min(nu, 1/2))")
    if nu > 2:
        return 1.0
    if nu > 1 or nu == 0.5:
        return 0.5
    return min(nu, 0.5) - eps
