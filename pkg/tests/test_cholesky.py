import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smcmc.cholesky import CholeskyCache, FreshCholeskyCache, correlation, fresh_factor
from smcmc.gp_probit import build_grid, simulate_probit


def _design(n, seed=0):
    X, _ = simulate_probit(n, seed)
    return (X - X.mean(axis=0)) / X.std(axis=0)


def test_empty_cache():
    c = CholeskyCache([0.5, 1.0], 2)
    assert c.t == 0 and c.L.shape == (2, 0, 0)
    c.append([0.0, 0.0])
    assert np.allclose(c.L[:, 0, 0], np.sqrt(1 + 1e-8))
    assert np.allclose(c.Q[:, 0, 0], 1 / (1 + 1e-8))


def test_two_point_hand_oracle():
    # C = [[1, c], [c, 1]]: L = [[1, 0], [c, d]], d = sqrt(1 - c^2), Linv row = [-c/d, 1/d]
    a, dist = 0.7, 1.3
    c = np.exp(-(a * dist) ** 2)
    d = np.sqrt(1 - c * c)
    cache = CholeskyCache([a], 1, jitter=0.0)
    cache.extend([[0.0], [dist]])
    tm = cache.last[0]
    assert tm.B == pytest.approx([c])
    assert tm.d == pytest.approx(d)
    assert tm.g == pytest.approx(1 / d)
    assert tm.E == pytest.approx([-c / d])
    assert np.allclose(cache.L[0], [[1, 0], [c, d]])
    assert np.allclose(cache.Q[0], np.linalg.inv([[1, c], [c, 1]]))
    assert cache.logdet[0] == pytest.approx(np.log(1 - c * c))


def test_correlation_shape_and_values():
    A = np.array([[0.0, 0.0], [1.0, 1.0]])
    K = correlation(A, A[:1], [1.0, 2.0])
    assert K.shape == (2, 2, 1)
    assert K[0, 1, 0] == pytest.approx(np.exp(-2.0))
    assert K[1, 1, 0] == pytest.approx(np.exp(-8.0))


def test_incremental_matches_fresh_factorisation():
    X = _design(200, 1)
    grid = build_grid(10)
    inc = CholeskyCache(grid, 2)
    worst = 0.0
    for t, x in enumerate(X, 1):
        inc.append(x)
        if t % 50 == 0:
            for h, a in enumerate(grid):
                Lf, Li = fresh_factor(inc.X, a, inc.jitter)
                worst = max(worst, np.abs(inc.L[h] - Lf).max())
    assert worst < 1e-8


def test_fresh_cache_agrees_with_incremental():
    X = _design(40, 2)
    grid = build_grid(5)
    inc = CholeskyCache(grid, 2).extend(X)
    ref = FreshCholeskyCache(grid, 2).extend(X)
    assert np.allclose(inc.L, ref.L, atol=1e-8)
    assert np.allclose(inc.logdet, ref.logdet, atol=1e-6)
    for a, b in zip(inc.last, ref.last):
        assert a.d == pytest.approx(b.d, abs=1e-8)


def test_invariants_after_many_appends():
    X = _design(120, 3)
    grid = build_grid(6)
    c = CholeskyCache(grid, 2, capacity=8).extend(X)  # exercises storage growth
    K = correlation(X, X, grid) + c.jitter * np.eye(len(X))
    for h in range(c.H):
        L, Li = c.L[h], c.Linv[h]
        assert np.all(np.diag(L) > 0)
        assert np.allclose(np.triu(L, 1), 0) and np.allclose(np.triu(Li, 1), 0)
        assert np.linalg.norm(L @ L.T - K[h]) / np.linalg.norm(K[h]) < 1e-10
        # Linv is only as accurate as the conditioning allows
        cond = np.linalg.cond(L)
        assert np.abs(L @ Li - np.eye(len(X))).max() < max(1e-8, 1e-13 * cond)
        assert np.allclose(c.Q[h], Li.T @ Li, atol=1e-8 * max(1.0, np.abs(c.Q[h]).max()))


def test_against_extended_precision_reference():
    X = _design(30, 4)
    a = 0.6
    cache = CholeskyCache([a], 2).extend(X)
    # textbook Cholesky in long double as an independent reference
    K = np.exp(-(a * a) * ((X[:, None].astype(np.longdouble) - X[None]) ** 2).sum(axis=2))
    K += np.longdouble(1e-8) * np.eye(len(X), dtype=np.longdouble)
    n = len(X)
    L = np.zeros_like(K)
    for j in range(n):
        s = K[j, j] - (L[j, :j] ** 2).sum()
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, n):
            L[i, j] = (K[i, j] - (L[i, :j] * L[j, :j]).sum()) / L[j, j]
    assert np.abs(cache.L[0] - L.astype(float)).max() < 1e-9


def test_duplicate_point_is_floored_and_flagged(caplog):
    c = CholeskyCache([1.0], 1, jitter=0.0)
    with caplog.at_level(logging.WARNING):
        c.extend([[0.5], [0.5]])
    assert c.flags == [(2, 0)]
    assert "ill-conditioned" in caplog.text
    assert c.L[0, 1, 1] == pytest.approx(1e-5)
    assert np.all(np.isfinite(c.Q))


def test_bad_grid_rejected():
    for g in ([], [1.0, -1.0], [[1.0]]):
        with pytest.raises(ValueError):
            CholeskyCache(g, 2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 25), st.floats(0.2, 2.0))
def test_append_reproduces_direct_factor(seed, n, a):
    X = np.random.default_rng(seed).uniform(-2, 2, size=(n, 2))
    c = CholeskyCache([a], 2, jitter=1e-6).extend(X)
    Lf, _ = fresh_factor(X, a, 1e-6)
    assert np.abs(c.L[0] - Lf).max() < 1e-6
