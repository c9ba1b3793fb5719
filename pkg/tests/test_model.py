import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heston_barrier_lab import HestonParams, RegimeError, cir_marginal_moments, feller_index, preset
from heston_barrier_lab.grid_paths import STREAM_EXACT, uniform_block
from heston_barrier_lab.model import PRESET_NAMES, load_params, parse_params
from heston_barrier_lab.schemes import cir_exact_transition
from heston_barrier_lab.stats import mean_se


def params(**kw):
    base = dict(mu=0.0, kappa=2.0, theta=0.04, sigma=0.4, rho=0.5, x0=0.0, v0=0.04, T=1.0)
    base.update(kw)
    return HestonParams(**base)


positive = st.floats(min_value=1e-3, max_value=10.0, allow_nan=False)


@pytest.mark.parametrize(
    "kappa, theta, sigma, expected",
    [(2.0, 0.04, 0.4, 1.0), (3.0, 0.04, 0.3, 8.0 / 3.0), (0.75, 0.04, math.sqrt(0.1), 0.6)],
)
def test_feller_index_examples(kappa, theta, sigma, expected):
    p = params(kappa=kappa, theta=theta, sigma=sigma)
    assert feller_index(p) == pytest.approx(expected, rel=1e-14)
    assert p.nu == feller_index(p)


@given(positive, positive, positive)
def test_feller_index_positive(kappa, theta, sigma):
    assert feller_index(params(kappa=kappa, theta=theta, sigma=sigma)) > 0


@pytest.mark.parametrize(
    "field, value",
    [("kappa", 0.0), ("theta", -1.0), ("sigma", 0.0), ("v0", 0.0), ("T", -1.0), ("rho", 1.5),
     ("mu", math.nan), ("kappa", math.inf)],
)
def test_invalid_parameters_rejected(field, value):
    with pytest.raises(ValueError):
        params(**{field: value})


def test_regime_guards():
    low = params(kappa=0.5, theta=0.04, sigma=0.4)  # nu = 0.25
    with pytest.raises(RegimeError, match="nu > 1/2"):
        low.require_lamperti()
    params().require_lamperti()
    with pytest.raises(RegimeError, match=r"\|rho\| != 1"):
        params(rho=-1.0).require_imperfect_correlation()
    params(rho=0.99).require_imperfect_correlation()


def test_moments_at_zero_and_infinity():
    p = params(v0=0.09)
    assert cir_marginal_moments(p, 0.0) == (pytest.approx(0.09, abs=1e-16), 0.0)
    m, v = cir_marginal_moments(p, np.inf)
    assert m == pytest.approx(p.theta, rel=1e-15)
    assert v == pytest.approx(p.theta * p.sigma**2 / (2 * p.kappa), rel=1e-15)


def test_moments_example_matches_exact_sampler():
    p = params(v0=0.09)
    m, v = cir_marginal_moments(p, 1.0)
    assert m == pytest.approx(0.04 + 0.05 * math.exp(-2.0), rel=1e-14)
    M = 100_000
    u = uniform_block(2024, range(M), STREAM_EXACT, 2)
    samples = cir_exact_transition(np.full(M, p.v0), 1.0, p, u[:, 0], u[:, 1])
    mean, se = mean_se(samples)
    assert abs(mean - m) <= 3 * se


def test_moments_vectorised():
    p = params()
    t = np.array([0.0, 0.5, 1.0])
    m, v = cir_marginal_moments(p, t)
    assert m.shape == v.shape == (3,)
    assert v[0] == 0.0
    with pytest.raises(ValueError):
        cir_marginal_moments(p, -0.1)


@given(positive, positive, positive, positive, st.floats(0.0, 50.0))
def test_moment_properties(kappa, theta, sigma, v0, t):
    p = params(kappa=kappa, theta=theta, sigma=sigma, v0=v0)
    m, v = cir_marginal_moments(p, t)
    assert v >= 0
    # the mean moves monotonically from v0 toward theta
    assert min(v0, theta) - 1e-12 <= m <= max(v0, theta) + 1e-12


def test_parse_params_with_comments_and_base():
    p = parse_params("# comment\nkappa = 3  # fast\nrho=0\n", base=preset("unit"))
    assert p.kappa == 3.0 and p.rho == 0.0 and p.sigma == preset("unit").sigma
    with pytest.raises(ValueError, match="unknown parameter"):
        parse_params("kapa=1", base=preset("unit"))
    with pytest.raises(ValueError, match="missing"):
        parse_params("kappa=1")
    with pytest.raises(ValueError, match="key=value"):
        parse_params("kappa 1", base=preset("unit"))


def test_load_params_roundtrip(tmp_path):
    p = preset("high")
    path = tmp_path / "p.cfg"
    path.write_text("\n".join(f"{k}={v!r}" for k, v in p.as_dict().items()))
    assert load_params(path) == p


def test_presets_feller_regimes():
    nus = {name: preset(name).nu for name in PRESET_NAMES}
    assert nus["high"] == pytest.approx(8 / 3)
    assert nus["unit"] == pytest.approx(1.0)
    assert nus["low"] == pytest.approx(0.6)
    with pytest.raises(ValueError):
        preset("medium")


def test_with_overrides_ignores_none():
    p = preset("high")
    assert p.with_overrides(rho=None) == p
    assert p.with_overrides(rho=0.1).rho == 0.1
