import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smcmc.diagnostics import (
    component_correlations,
    cross_chain_acf,
    epsilon_error_sum,
    select_epsilon,
    single_chain_acf,
)


def pearson(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    da, db = a - a.mean(), b - b.mean()
    return float((da * db).sum() / np.sqrt((da * da).sum() * (db * db).sum()))


# --------------------------------------------------------------------------- cross-chain


def test_identical_snapshots_give_one():
    x = np.random.default_rng(0).standard_normal((50, 1))
    assert cross_chain_acf(x, x) == pytest.approx(1.0)


def test_linear_and_reversed_columns():
    base = np.array([1.0, 2, 3, 4])
    assert cross_chain_acf(base, 2 * base) == pytest.approx(1.0)
    assert cross_chain_acf(base, base[::-1]) == pytest.approx(-1.0)


def test_max_over_components_matches_direct_formula():
    rng = np.random.default_rng(1)
    b = rng.standard_normal((30, 3))
    c = b * [0.2, 0.9, -0.5] + rng.standard_normal((30, 3))
    want = max(pearson(b[:, j], c[:, j]) for j in range(3))
    assert cross_chain_acf(b, c) == pytest.approx(want, abs=1e-14)


def test_constant_components_are_skipped_or_undefined():
    rng = np.random.default_rng(2)
    b = np.column_stack([np.ones(10), rng.standard_normal(10)])
    c = np.column_stack([np.ones(10), b[:, 1]])
    assert cross_chain_acf(b, c) == pytest.approx(1.0)
    assert np.isnan(component_correlations(b, c)[0])
    assert cross_chain_acf(np.ones((10, 2)), np.ones((10, 2))) is None


def test_shape_mismatch_is_rejected():
    with pytest.raises(ValueError):
        cross_chain_acf(np.zeros((5, 2)), np.zeros((5, 3)))
    with pytest.raises(ValueError):
        cross_chain_acf(np.zeros((1, 2)), np.zeros((1, 2)))


snap = arrays(np.float64, (12, 3), elements=st.floats(-100, 100, allow_nan=False, width=64))


@settings(max_examples=60, deadline=None)
@given(snap, snap)
def test_symmetry(a, b):
    x, y = cross_chain_acf(a, b), cross_chain_acf(b, a)
    if x is None:
        assert y is None
    else:
        assert x == pytest.approx(y, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(snap, snap, st.floats(0.1, 10), st.floats(-50, 50))
def test_affine_invariance(a, b, alpha, beta):
    r0 = component_correlations(a, b)
    r1 = component_correlations(a, alpha * b + beta)
    r2 = component_correlations(a, -alpha * b + beta)
    ok = np.isfinite(r0) & np.isfinite(r1) & np.isfinite(r2)
    assert np.allclose(r0[ok], r1[ok], atol=1e-8)
    assert np.allclose(r0[ok], -r2[ok], atol=1e-8)


# --------------------------------------------------------------------------- single chain


def test_single_chain_alternating_is_minus_one():
    x = np.array([1.0, -1.0] * 20)
    assert single_chain_acf(x, 1, (1, 39)) == pytest.approx(-1.0)


def test_single_chain_constant_is_undefined():
    assert single_chain_acf(np.ones(20), 1, (1, 19)) is None


def test_single_chain_iid_is_small():
    x = np.random.default_rng(3).standard_normal(10_000)
    assert abs(single_chain_acf(x, 1, (1, 9_999))) < 0.05


def test_single_chain_window_too_short():
    with pytest.raises(ValueError):
        single_chain_acf(np.arange(10.0), 3, (4, 6))


def test_cross_chain_beats_single_chain_on_sticky_two_mode_chain():
    # two modes {0,1,2} and {3,4,5}; fast mixing inside a mode, rare switches
    p_switch = 0.002
    inner = np.full((3, 3), 1 / 3)
    T = np.zeros((6, 6))
    T[:3, :3] = (1 - p_switch) * inner
    T[3:, 3:] = (1 - p_switch) * inner
    T[:3, 3:] = p_switch / 3
    T[3:, :3] = p_switch / 3
    # relaxation time 1 / (1 - lambda_1) with lambda_1 = 1 - 2 p_switch
    relax = 1.0 / (2 * p_switch)
    lag = int(relax / 2)
    values = np.arange(6.0)
    cum = T.cumsum(axis=1)

    def step(states, rng):
        u = rng.random(len(states))
        return (u[:, None] > cum[states]).sum(axis=1)

    cross, single = [], []
    for rep in range(50):
        rng = np.random.default_rng(rep)
        # L = 200 chains from the stationary (uniform) distribution
        s0 = rng.integers(0, 6, size=200)
        s = s0.copy()
        for _ in range(lag):
            s = step(s, rng)
        cross.append(cross_chain_acf(values[s0], values[s]))
        # one chain started in mode A, window short enough that it stays there
        tr = np.empty(2 * lag + 2, dtype=int)
        tr[0] = 0
        cur = np.array([0])
        for i in range(1, len(tr)):
            cur = step(cur, rng)
            tr[i] = cur[0]
        single.append(single_chain_acf(values[tr], lag, (lag, len(tr) - 1)))
    single = [v for v in single if v is not None]
    assert np.median(cross) > np.median(single)


# --------------------------------------------------------------------------- epsilon


def test_select_epsilon_single_term():
    eps, sat = select_epsilon(1, 0.5)
    assert eps == pytest.approx(0.5, abs=1e-6) and not sat


def test_select_epsilon_two_terms_against_closed_form():
    # eps^2 + eps / sqrt(2) = 0.5  ->  eps = (-1/sqrt(2) + sqrt(1/2 + 2)) / 2
    root = (-1 / np.sqrt(2) + np.sqrt(0.5 + 2.0)) / 2
    eps, _ = select_epsilon(2, 0.5)
    assert root == pytest.approx(0.4370160, abs=1e-6)
    assert eps <= root < eps + 1.1e-6


def test_select_epsilon_is_maximal_on_grid():
    for n, tol in [(5, 0.3), (50, 0.2), (100, 0.1)]:
        eps, _ = select_epsilon(n, tol)
        assert epsilon_error_sum(eps, n) <= tol
        assert epsilon_error_sum(eps + 1e-6, n) > tol


def test_select_epsilon_saturation_flag():
    eps, sat = select_epsilon(10, 1e-9)
    assert sat and eps == pytest.approx(1e-6)


def test_select_epsilon_recommends_half_for_hundred_points():
    eps, _ = select_epsilon(100, 0.1)
    assert abs(eps - 0.5) < 0.01


def test_error_sum_large_n_scales_like_inverse_sqrt():
    # for fixed eps the sum behaves like eps / ((1 - eps) sqrt(n))
    for eps in (0.3, 0.5):
        n = 10_000
        assert epsilon_error_sum(eps, n) * np.sqrt(n) == pytest.approx(eps / (1 - eps), rel=1e-3)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 300), st.floats(0.01, 2.0))
def test_select_epsilon_feasible_property(n, tol):
    eps, sat = select_epsilon(n, tol)
    assert 0 < eps < 1
    if not sat:
        assert epsilon_error_sum(eps, n) <= tol
