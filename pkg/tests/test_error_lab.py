import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heston_barrier_lab import RegimeError, preset
from heston_barrier_lab import error_lab as el
from heston_barrier_lab import grid_paths as gp
from heston_barrier_lab.grid_paths import make_grid


@pytest.fixture(scope="module")
def small_reports():
    return el.strong_errors(preset("high"), [16, 32, 64, 128], N_f=1024, M=4000, seed=3)


def test_identical_schemes_at_fine_resolution_have_zero_error():
    p = preset("high")
    dW, dB = gp.increments(make_grid(p.T, 256), range(64), seed=1)
    (dx, dv), = el.coupled_abs_errors(p, [256], dW, dB, reference="euler")
    assert np.all(dx == 0) and np.all(dv == 0)
    (dx, dv), = el.coupled_abs_errors(p, [256], dW, dB, reference="reference", scheme="reference")
    assert np.all(dx == 0) and np.all(dv == 0)


def test_report_invariants(small_reports):
    for r in small_reports:
        assert r.err_l1 == pytest.approx(r.err_x + r.err_v, rel=1e-10)
        assert min(r.se_x, r.se_v, r.se_l1) >= 0
        assert r.N_f == 1024 and r.M == 4000


def test_error_decreases_with_N(small_reports):
    for a, b in zip(small_reports, small_reports[1:]):
        assert b.err_l1 < a.err_l1 + 2 * math.hypot(a.se_l1, b.se_l1)


def test_standard_error_scaling():
    p = preset("high")
    small = el.strong_error(p, 32, N_f=512, M=4000, seed=17)
    large = el.strong_error(p, 32, N_f=512, M=8000, seed=17)
    assert large.se_l1 * math.sqrt(2) == pytest.approx(small.se_l1, rel=0.2)


def test_thread_count_does_not_change_reports():
    p = preset("unit")
    a = el.strong_errors(p, [16, 32], N_f=256, M=1500, seed=5, threads=1)
    b = el.strong_errors(p, [16, 32], N_f=256, M=1500, seed=5, threads=3)
    assert a == b


@pytest.mark.parametrize(
    "N_list, N_f, M",
    [([24], 256, 2000), ([64], 256, 2000), ([16], 256, 999)],
)
def test_strong_errors_preconditions(N_list, N_f, M):
    with pytest.raises(ValueError):
        el.strong_errors(preset("high"), N_list, N_f, M)


@pytest.mark.parametrize("order", [0.5, 0.3])
def test_fit_recovers_synthetic_power_law(order):
    Ns = [16, 32, 64, 128, 256, 512]
    pts = [(math.log(N), math.log(0.7 * N**-order)) for N in Ns]
    fit = el.fit_points(pts)
    assert fit.slope == pytest.approx(order, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.points == tuple(pts)
    # the stored points reproduce the fit exactly
    assert el.fit_points(fit.points) == fit


def test_fit_preconditions():
    with pytest.raises(ValueError):
        el.fit_points([(1, 1), (2, 2), (3, 3)])
    with pytest.raises(ValueError):
        el.fit_points([(1, 1), (1, 2), (3, 3), (4, 4)])


def test_fit_rate_on_reports(small_reports):
    fit = el.fit_rate(small_reports, "l1", nu=preset("high").nu)
    assert fit.expected_order == 0.5
    assert 0.3 < fit.slope < 0.8
    slopes = el.running_slopes(small_reports)
    assert math.isnan(slopes[0]) and slopes[-1] == pytest.approx(fit.slope, abs=1e-10)


def test_euler_expected_order():
    assert el.euler_expected_order(0.6) == pytest.approx(0.3)
    assert el.euler_expected_order(8 / 3) == 0.5


def test_barrier_constant_example():
    p = preset("unit").with_overrides(sigma=0.4, T=1.0, rho=0.5)
    assert el.barrier_constant(p) == pytest.approx(0.4 / 8 * math.sqrt(0.75), rel=1e-15)
    assert el.barrier_constant(p) == pytest.approx(0.04330, abs=5e-6)


@pytest.mark.parametrize("rho", [1.0, -1.0])
def test_barrier_rejects_perfect_correlation(rho):
    with pytest.raises(RegimeError, match=r"\|rho\|"):
        el.barrier_table(preset("high").with_overrides(rho=rho), [16], 256, 1000)


def test_barrier_table_small(small_reports):
    p = preset("high")
    rows = el.barrier_table(p, reports=small_reports[:2], bridge_paths=2000, refine=6)
    for r in rows:
        assert r.floor == pytest.approx(el.barrier_constant(p) / math.sqrt(r.N))
        assert r.floor_ok
        lo, hi = r.bridge_bracket
        assert lo - 3 * r.bridge_se <= r.bridge_scaled <= hi + 3 * r.bridge_se
        assert r.ratio_lower < 1


@pytest.mark.parametrize(
    "nu, eps, expected", [(3.0, 0.1, 1.0), (3.0, 0.01, 1.0), (1.5, 0.1, 0.5), (0.6, 0.05, 0.45),
                          (0.5, 0.1, 0.5), (1.0, 0.2, 0.3)],
)
def test_alpha_table(nu, eps, expected):
    assert el.alpha_table(nu, eps) == pytest.approx(expected, abs=1e-15)


@given(st.floats(0.01, 10.0), st.floats(0.01, 0.99))
def test_alpha_table_range(nu, frac):
    eps = frac * min(nu, 0.5)
    a = el.alpha_table(nu, eps)
    assert 0 < a <= 1


def test_alpha_table_domain():
    for nu, eps in [(0.0, 0.1), (1.0, 0.0), (0.3, 0.3), (2.0, 0.6)]:
        with pytest.raises(ValueError):
            el.alpha_table(nu, eps)
