import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtri

from heston_barrier_lab import grid_paths as gp
from heston_barrier_lab._normal import inverse_normal
from heston_barrier_lab.grid_paths import TimeGrid, make_grid
from heston_barrier_lab.stats import mean_se, variance_se

M_BIG = 100_000


@pytest.fixture(scope="module")
def terminal_ensemble():
    """10^5 paths on a 4-step grid (T = 1)."""
    grid = make_grid(1.0, 4)
    dW, dB = gp.increments(grid, range(M_BIG), seed=31)
    return grid, dW, dB


def test_knots_and_eta():
    g = make_grid(1.0, 4)
    np.testing.assert_array_equal(g.knots, [0, 0.25, 0.5, 0.75, 1.0])
    assert g.eta(0.3) == 0.25
    for t in g.knots:
        assert g.eta(t) == t
    assert g.n_of(1.0) == 4


@given(st.floats(0.1, 10.0), st.integers(1, 500), st.floats(0.0, 1.0))
def test_eta_properties(T, N, frac):
    g = make_grid(T, N)
    t = frac * T
    e = g.eta(t)
    assert e <= t + 1e-15
    assert t - e < g.dt * (1 + 1e-12)
    assert g.knots[-1] == T
    # every knot is a fixed point of eta
    k = int(frac * N)
    assert g.eta(g.knots[k]) == pytest.approx(g.knots[k], abs=1e-15 * T)


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 4)
    assert make_grid(1.0, 4).divides(make_grid(1.0, 16))
    assert not make_grid(1.0, 3).divides(make_grid(1.0, 16))


def test_inverse_normal_matches_ndtri():
    u = np.concatenate([np.linspace(1e-300, 1e-10, 50), np.linspace(1e-6, 1 - 1e-6, 10001),
                        1 - np.logspace(-16, -6, 50)])
    np.testing.assert_allclose(inverse_normal(u), ndtri(u), rtol=1e-13, atol=1e-14)


def test_same_seed_is_bit_identical():
    g = make_grid(1.0, 64)
    a = gp.bundle(g, seed=5, seed_id=17)
    b = gp.bundle(g, seed=5, seed_id=17)
    assert a.dW.tobytes() == b.dW.tobytes() and a.dB.tobytes() == b.dB.tobytes()
    c = gp.bundle(g, seed=5, seed_id=18)
    assert not np.array_equal(a.dW, c.dW)


def test_counter_addressing():
    full = gp.normals(9, 3, gp.STREAM_W, 100)
    np.testing.assert_array_equal(gp.normals(9, 3, gp.STREAM_W, 10, start=90), full[90:])
    block = gp.normal_block(9, [1, 3], gp.STREAM_W, 100)
    np.testing.assert_array_equal(block[1], full)


def test_uniforms_open_interval():
    u = gp.uniforms(0, 0, 0, 100_000)
    assert u.min() > 0 and u.max() < 1


def test_thread_count_does_not_change_paths():
    g = make_grid(1.0, 8)
    one = list(gp.sample_paths(g, 20, seed=3, threads=1))
    three = list(gp.sample_paths(g, 20, seed=3, threads=3))
    for a, b in zip(one, three):
        assert a.seed_id == b.seed_id
        assert a.dW.tobytes() == b.dW.tobytes()
    chunks = gp.map_batches(lambda ids: gp.increments(g, ids, 3)[0], 20, threads=3, batch_size=7)
    np.testing.assert_array_equal(np.concatenate(chunks), np.stack([b.dW for b in one]))


def test_path_values():
    b = gp.bundle(make_grid(1.0, 8), seed=1, seed_id=0)
    assert b.W[0] == 0.0 and b.B[0] == 0.0
    np.testing.assert_allclose(np.diff(b.W), b.dW, atol=1e-15)


def test_terminal_moments(terminal_ensemble):
    grid, dW, _ = terminal_ensemble
    W_T = dW.sum(axis=1)
    assert abs(W_T.mean()) <= 3 * math.sqrt(grid.T / M_BIG)
    var, se = variance_se(W_T)
    assert abs(var - grid.T) <= 3 * se


def test_increment_statistics(terminal_ensemble):
    grid, dW, dB = terminal_ensemble
    dt = grid.dt
    for k in range(grid.N):
        for d in (dW[:, k], dB[:, k]):
            m, se = mean_se(d)
            assert abs(m) <= 4 * se
            v, sev = variance_se(d)
            assert abs(v - dt) <= 4 * sev
        cov, se = mean_se(dW[:, k] * dB[:, k])
        assert abs(cov) <= 4 * se
    # distinct increments of the same motion are uncorrelated as well
    cov, se = mean_se(dW[:, 0] * dW[:, 1])
    assert abs(cov) <= 4 * se


def test_coarsen_examples():
    d = np.random.default_rng(0).normal(size=(3, 16))
    np.testing.assert_array_equal(gp.coarsen(d, 16), d)
    np.testing.assert_allclose(gp.coarsen(np.full(16, 0.1), 4), np.full(4, 0.4), rtol=1e-15)
    with pytest.raises(ValueError):
        gp.coarsen(d, 5)


@settings(max_examples=50)
@given(st.integers(1, 6), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_coarsen_agrees_with_fine_path_at_shared_knots(log_n, log_m, seed):
    N, m = 2**log_n, 2**log_m
    d = np.random.default_rng(seed).normal(size=(2, N * m))
    coarse = gp.coarsen(d, N)
    # oracle: direct recomputation of each coarse increment as a sum of fine ones
    direct = np.array([[row[k * m:(k + 1) * m].sum() for k in range(N)] for row in d])
    np.testing.assert_allclose(coarse, direct, rtol=0, atol=1e-13)
    np.testing.assert_allclose(gp.cumulative(coarse), gp.cumulative(d)[:, ::m], atol=1e-13)


def test_correlate_examples():
    dW, dB = gp.increments(make_grid(1.0, 4), range(5), seed=2)
    np.testing.assert_array_equal(gp.correlate(dW, dB, 0.0), dB)
    np.testing.assert_array_equal(gp.correlate(dW, dB, 1.0), dW)
    with pytest.raises(ValueError):
        gp.correlate(dW, dB, 1.2)


def test_correlate_ensemble_correlation(terminal_ensemble):
    _, dW, dB = terminal_ensemble
    Z_T = gp.correlate(dW, dB, 0.6).sum(axis=1)
    W_T = dW.sum(axis=1)
    r = np.corrcoef(Z_T, W_T)[0, 1]
    se = (1 - r * r) / math.sqrt(M_BIG)
    assert abs(r - 0.6) <= 3 * se


def test_batch_helpers():
    assert [len(b) for b in gp.batches(10, 4)] == [4, 4, 2]
    assert gp.cache_batch(2**20) == 1
    assert gp.step_batch(8) == gp.DEFAULT_BATCH
    with pytest.raises(ValueError):
        next(gp.sample_paths(make_grid(1.0, 2), 0, seed=1))
