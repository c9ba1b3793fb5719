"""Acceptance checks shared by ``hbl selftest`` and the test-suite.

Each check runs one experiment at a fixed seed and returns a
:class:`CheckResult`.  Two tiers exist: ``full`` uses the reference path
counts (M = 10^5, or 10^4 for the decomposition), ``quick`` uses M = 10^4
(2 * 10^3 for the decomposition) with tolerances that scale with M.
"""

from __future__ import annotations

import functools
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from . import bridge_lab, error_lab, estimators, schemes
from .grid_paths import make_grid
from .model import preset


@dataclass(frozen=True)
class Tier:
    name: str
    paths: int
    decompose_paths: int
    cc_rel_tol: float

    def ks_threshold(self, M: int) -> float:
        """0.02 at M = 10^5; asymptotic 1% critical value + 0.01 allowance below that."""
        return max(0.02, bridge_lab.ks_critical(M) + 0.01)


FULL = Tier("full", paths=100_000, decompose_paths=10_000, cc_rel_tol=0.02)
QUICK = Tier("quick", paths=10_000, decompose_paths=2_000, cc_rel_tol=0.05)
TIERS = {"full": FULL, "quick": QUICK}

FINE = 2**12
RATE_STEPS = (16, 32, 64, 128, 256, 512)
RATE_BAND = (0.4, 0.6)
BRIDGE_BRACKET = (0.25, 0.33)
SEEDS = {1: 101, 3: 303, 4: 404, 5: 505, 7: 707, 8: 808, 9: 909}


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    limit: float | None = None

    @property
    def within_time(self) -> bool:
        return self.limit is None or self.seconds <= self.limit

    def line(self) -> str:
        status = "PASS" if self.passed and self.within_time else "FAIL"
        budget = f"{self.seconds:.1f}s" + (f"/{self.limit:.0f}s" if self.limit else "")
        return f"[{status}] #{self.number} {self.name} ({budget}): {self.detail}"


def _timed(number: int, name: str, limit: float | None):
    def wrap(fn: Callable[..., tuple[bool, str]]):
        @functools.wraps(fn)
        def run(tier: Tier = FULL) -> CheckResult:
            start = time.perf_counter()
            ok, detail = fn(tier)
            return CheckResult(number, name, ok, detail, time.perf_counter() - start, limit)

        run.number = number
        return run

    return wrap


@functools.lru_cache(maxsize=None)
def _rate_reports(preset_name: str, M: int, seed: int):
    return error_lab.strong_errors(preset(preset_name), RATE_STEPS, FINE, M, seed)


@_timed(1, "Clark-Cameron error 0.5 N^-1/2", 60)
def check_clark_cameron(tier: Tier):
    rows = estimators.clark_cameron_table([4, 16, 64], tier.paths, FINE, SEEDS[1])
    ok = all(r.passed(3.0, tier.cc_rel_tol) for r in rows)
    detail = "; ".join(
        f"N={r.N} rms={r.estimate:.5f}+-{r.std_error:.5f} target={r.target:.5f} "
        f"rel={r.relative_deviation:.2%}"
        for r in rows
    )
    return ok, detail


@_timed(2, "bridge quadrature pi/8 identity", 1)
def check_quadrature(tier: Tier):
    gaps = []
    for T, N in [(1.0, 1), (1.0, 4), (1.0, 8), (1.0, 64), (2.5, 7)]:
        prof = bridge_lab.bridge_l2_profile(make_grid(T, N))
        gaps.append(prof.relative_gap)
    worst = max(gaps)
    return worst <= 1e-10, f"max relative gap {worst:.2e} (tol 1e-10)"


@_timed(3, "bridge law identity and T/4 floor", 120)
def check_bridge(tier: Tier):
    M = tier.paths
    ident8 = bridge_lab.distribution_identity_test(M, 8, 10, SEEDS[3])
    ident64 = bridge_lab.distribution_identity_test(M, 64, 6, SEEDS[3] + 1)
    thr = tier.ks_threshold(M)
    lo, hi = BRIDGE_BRACKET
    ok_ks = ident8.ks_stat < thr
    ok_means = all(lo <= d.scaled_mean <= hi for d in (ident8, ident64))
    detail = (
        f"KS={ident8.ks_stat:.4f} (<{thr:.4f}); sqrt(N)E|I|/T: "
        f"N=8 {ident8.scaled_mean:.4f}, N=64 {ident64.scaled_mean:.4f} in [{lo}, {hi}]"
    )
    return ok_ks and ok_means, detail


@_timed(4, "CIR marginal oracle", 120)
def check_marginal(tier: Tier):
    chk = schemes.marginal_check(preset("high"), tier.paths, FINE, SEEDS[4])
    ok_mean = abs(chk.mean - chk.mean_target) <= 3 * chk.mean_se
    ok_var = abs(chk.var - chk.var_target) <= 3 * chk.var_se
    thr = tier.ks_threshold(tier.paths)
    ok_ks = chk.ks_stat < thr
    detail = (
        f"mean {chk.mean:.6f}+-{chk.mean_se:.6f} vs {chk.mean_target:.6f}; "
        f"var {chk.var:.3e}+-{chk.var_se:.1e} vs {chk.var_target:.3e}; "
        f"KS(reference, exact)={chk.ks_stat:.4f} (<{thr:.4f})"
    )
    return ok_mean and ok_var and ok_ks, detail


@_timed(5, "Euler L1 rate, high Feller", 600)
def check_rate(tier: Tier):
    reports = _rate_reports("high", tier.paths, SEEDS[5])
    fit = error_lab.fit_rate(reports, "l1", preset("high").nu)
    lo, hi = RATE_BAND
    return lo <= fit.slope <= hi, f"slope {fit.slope:.3f} in [{lo}, {hi}], r2={fit.r_squared:.4f}"


@_timed(6, "barrier floor c N^-1/2", 600)
def check_floor(tier: Tier):
    p = preset("high")
    reports = _rate_reports("high", tier.paths, SEEDS[5])
    rows = error_lab.barrier_table(p, reports=reports)
    ok = all(r.floor_ok for r in rows)
    worst = min(rows, key=lambda r: r.ratio - r.ratio_lower)
    detail = (
        f"c={error_lab.barrier_constant(p):.5f}; min ratio err_x/floor "
        f"{min(r.ratio for r in rows):.3f} (worst N={worst.N} needs >= {worst.ratio_lower:.3f})"
    )
    return ok, detail


@_timed(7, "V-rate regime degradation", 600)
def check_degradation(tier: Tier):
    high = error_lab.fit_rate(_rate_reports("high", tier.paths, SEEDS[5]), "v")
    low = error_lab.fit_rate(_rate_reports("low", tier.paths, SEEDS[7]), "v")
    ok = low.slope <= high.slope + 0.1 and high.r_squared >= 0.95 and low.r_squared >= 0.95
    detail = (
        f"V-rate nu=0.6: {low.slope:.3f} (r2 {low.r_squared:.4f}) <= "
        f"nu=2.67: {high.slope:.3f} (r2 {high.r_squared:.4f}) + 0.1"
    )
    return ok, detail


@_timed(8, "decomposition reconstruction and int A dB Riemann gap", 600)
def check_decomposition(tier: Tier):
    p = preset("high")
    M = tier.decompose_paths
    gaps = estimators.reconstruction_gaps(p, [2**10, 2**12, 2**14], M, SEEDS[8])
    monotone = all(b.estimate < a.estimate for a, b in zip(gaps, gaps[1:]))
    riemann = estimators.riemann_gaps(p, RATE_STEPS, FINE, M, SEEDS[8] + 1)
    fit = error_lab.fit_points([(math.log(r.N), math.log(r.estimate)) for r in riemann])
    loglog = -fit.slope
    detail = (
        "reconstruction gap "
        + " > ".join(f"{g.estimate:.2e}" for g in gaps)
        + f"; Riemann log-log slope {loglog:.3f} (<= -0.5)"
    )
    return monotone and loglog <= -0.5, detail


@_timed(9, "determinism across thread counts", 60)
def check_determinism(tier: Tier):
    from .cli import main

    bodies = {}
    with tempfile.TemporaryDirectory() as tmp:
        for command in (["cc", "--steps", "4,16"], ["bridge-check", "--steps", "8", "--refine", "6"]):
            for threads in (1, 3):
                out = Path(tmp) / f"{command[0]}_{threads}.csv"
                argv = command + ["--paths", "4000", "--steps-fine", "1024", "--seed",
                                  str(SEEDS[9]), "--threads", str(threads), "--out", str(out)]
                code = main(argv)
                if code != 0:
                    return False, f"{' '.join(argv)} exited {code}"
                bodies[(command[0], threads)] = out.read_bytes()
    same = all(bodies[(c, 1)] == bodies[(c, 3)] for c in ("cc", "bridge-check"))
    return same, "cc and bridge-check CSVs byte-identical for --threads 1 and 3" if same else "CSV bytes differ"


CHECKS = (
    check_clark_cameron,
    check_quadrature,
    check_bridge,
    check_marginal,
    check_rate,
    check_floor,
    check_degradation,
    check_decomposition,
    check_determinism,
)


def run_all(tier: Tier = FULL, echo: Callable[[str], None] | None = print) -> list[CheckResult]:
    results = []
    for check in CHECKS:
        res = check(tier)
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results
