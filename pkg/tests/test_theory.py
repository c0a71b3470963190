import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from smcmc.theory import (
    CertificateError,
    ContractViolation,
    DriftCertificate,
    FiniteChain,
    SmcmcInstance,
    check_drift,
    check_universal,
    dobrushin,
    drift_bound,
    drifting_sequence,
    hellinger_normal,
    l1_distance,
    minorization_rho,
    normal_mean_drift,
    random_chain,
    random_reversible_chain,
    run_suite,
    search_certificate,
    smcmc_bound_check,
    spectral_acf_check,
    stationary,
    tv_distance,
    uniform_rho,
    v_norm,
    v_norm_check,
    v_rho,
    verify_certificate,
)

SYM = FiniteChain(np.array([[0.9, 0.1], [0.1, 0.9]]))


# --------------------------------------------------------------------------- basics


def test_distances():
    assert l1_distance([0.5, 0.5], [0.75, 0.25]) == pytest.approx(0.5)
    assert l1_distance([1, 0], [0, 1]) == pytest.approx(2.0)
    assert tv_distance([1, 0], [0, 1]) == pytest.approx(1.0)


def test_stationary_distribution():
    T = np.array([[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]])
    assert stationary(T) == pytest.approx([0.25, 0.5, 0.25])
    with pytest.raises(ValueError):
        FiniteChain(np.array([[0.5, 0.6], [0.5, 0.5]]))


def test_contraction_coefficients_examples():
    assert uniform_rho(SYM) == pytest.approx(0.8)
    assert dobrushin(SYM) == pytest.approx(1.6)
    assert uniform_rho(SYM) <= dobrushin(SYM)
    assert minorization_rho(SYM) == pytest.approx(0.8)
    iid = FiniteChain(np.tile([0.2, 0.3, 0.5], (3, 1)))
    assert uniform_rho(iid) == pytest.approx(0.0, abs=1e-14)
    assert minorization_rho(iid) == pytest.approx(0.0, abs=1e-14)


def test_universal_bound_is_tight_for_symmetric_two_state():
    # p_t - pi = 0.8^t (p_0 - pi) for this chain
    rep = check_universal(SYM, [1.0, 0.0], 20)
    assert rep.passed and max(abs(m) for m in rep.margins) < 1e-12


def test_non_contracting_chain_rejected():
    with pytest.raises(ContractViolation):
        check_universal(FiniteChain(np.eye(2), np.array([0.5, 0.5])), [1.0, 0.0], 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_random_chain_properties(seed, n):
    rng = np.random.default_rng(seed)
    ch = random_chain(rng, n)
    assert np.allclose(ch.pi @ ch.T, ch.pi, atol=1e-12)
    rho = uniform_rho(ch)
    assert 0 <= rho < 1
    assert rho <= dobrushin(ch) + 1e-12
    assert rho <= 2 * minorization_rho(ch) + 1e-12
    p0 = rng.dirichlet(np.ones(n))
    assert check_universal(ch, p0, 15).passed


# --------------------------------------------------------------------------- drift


def test_drift_with_constant_v_and_whole_space():
    # V = 1, C = X: b = 1 - lam, B = 1 / lam, and for j = t the bound is rho^t + lam
    ch = random_chain(np.random.default_rng(3), 4)
    rho, lam = uniform_rho(ch), 0.4
    V, C = np.ones(4), np.ones(4, dtype=bool)
    p0 = np.eye(4)[0]
    for t in (1, 3, 7):
        got = drift_bound(ch, V, C, rho, lam, 1 - lam, p0, t, t)
        assert got == pytest.approx(rho**t + lam)


def test_invalid_certificates_raise():
    ch = random_chain(np.random.default_rng(4), 4)
    rho = uniform_rho(ch)
    ones, whole = np.ones(4), np.ones(4, dtype=bool)
    bad = [
        DriftCertificate(ones, whole, rho, 0.4, 0.1),  # drift condition needs b >= 0.6
        DriftCertificate(ones, whole, 0.5 * rho, 0.4, 0.6),  # rho too small on C
        DriftCertificate(0.5 * ones, whole, rho, 0.4, 0.6),
        DriftCertificate(ones, np.zeros(4, dtype=bool), rho, 0.4, 0.6),
        DriftCertificate(ones, whole, rho, 1.0, 0.6),
    ]
    for cert in bad:
        with pytest.raises(CertificateError):
            verify_certificate(ch, cert)
    with pytest.raises(ContractViolation):
        drift_bound(ch, ones, whole, rho, 0.4, 0.6, np.eye(4)[0], 3, 4)


def test_searched_certificate_bounds_hold():
    rng = np.random.default_rng(5)
    for _ in range(10):
        ch = random_chain(rng, 5)
        cert = search_certificate(ch)
        verify_certificate(ch, cert)
        assert check_drift(ch, cert, rng.dirichlet(np.ones(5)), 25).passed


# --------------------------------------------------------------------------- sequential bound


def test_sequential_bound_zero_when_targets_do_not_move():
    ch = random_chain(np.random.default_rng(6), 4)
    rep, rows = smcmc_bound_check(SmcmcInstance([ch] * 6, [2] * 5))
    assert rep.passed
    assert np.allclose(rows["alpha"], 0) and np.allclose(rows["full"], 0)
    assert np.allclose(rows["l1"], 0, atol=1e-14)


def test_sequential_bound_first_step():
    chains = drifting_sequence(np.random.default_rng(7), 5, 1)
    rep, rows = smcmc_bound_check(SmcmcInstance(chains, [3]))
    eps = uniform_rho(chains[1]) ** 3
    alpha = tv_distance(chains[1].pi, chains[0].pi)
    assert rows["full"][0] == pytest.approx(eps * alpha)
    assert rows["weak"][0] == pytest.approx(2 * eps * alpha)
    assert rows["tv"][0] <= rows["full"][0] + 1e-15


def test_sequential_instance_validation():
    chains = drifting_sequence(np.random.default_rng(8), 4, 3)
    with pytest.raises(ContractViolation):
        SmcmcInstance(chains, [1, 1])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.lists(st.integers(1, 6), min_size=1, max_size=12))
def test_sequential_bounds_property(seed, n, m):
    rng = np.random.default_rng(seed)
    chains = drifting_sequence(rng, n, len(m))
    # the bound presumes the ensemble starts exactly at pi_0
    rep, rows = smcmc_bound_check(SmcmcInstance(chains, m))
    assert rep.passed
    assert np.all(rows["full"] <= 0.5 * rows["weak"] + 1e-12)


# --------------------------------------------------------------------------- V-norm


def test_v_norm_with_unit_v_is_l1():
    ch = random_chain(np.random.default_rng(9), 5)
    mu = ch.pi - np.eye(5)[2]
    assert v_norm(mu, np.ones(5)) == pytest.approx(l1_distance(np.eye(5)[2], ch.pi))
    assert v_rho(ch, np.ones(5)) == pytest.approx(uniform_rho(ch))
    a = v_norm_check(ch, np.ones(5), np.eye(5)[0], 20)
    b = check_universal(ch, np.eye(5)[0], 20)
    assert np.allclose(a.margins, b.margins)
    with pytest.raises(ContractViolation):
        v_norm_check(ch, np.full(5, 0.5), np.eye(5)[0], 3)


# --------------------------------------------------------------------------- spectral


def test_two_state_autocorrelation_is_geometric():
    ch = FiniteChain(np.array([[0.75, 0.25], [0.25, 0.75]]))
    res = spectral_acf_check(ch, [0.0, 1.0], t_max=50)
    t = np.arange(1, len(res.acf) + 1)
    assert np.allclose(res.acf, 0.5**t, rtol=1e-9)
    assert res.lambda1 == pytest.approx(0.5)
    assert not res.flagged and res.rel_error < 1e-6


def test_function_orthogonal_to_slowest_mode_is_flagged():
    # symmetric (uniform pi) chain with distinct eigenvalues; h is the second eigenfunction
    S = np.array([[0.6, 0.3, 0.1], [0.3, 0.5, 0.2], [0.1, 0.2, 0.7]])
    ch = FiniteChain(S)
    w, U = np.linalg.eigh(S)
    order = np.argsort(-np.abs(w))  # [1, lambda_1, lambda_2]
    lam1, lam2 = abs(w[order[1]]), abs(w[order[2]])
    res = spectral_acf_check(ch, U[:, order[2]], t_max=2000)
    assert res.flagged and res.overlap < 1e-20
    assert res.lambda1 == pytest.approx(lam1)
    assert res.rate == pytest.approx(lam2, rel=1e-3)


def test_spectral_needs_reversible_chain():
    T = np.array([[0.1, 0.9, 0.0], [0.0, 0.1, 0.9], [0.9, 0.0, 0.1]])
    with pytest.raises(ContractViolation):
        spectral_acf_check(FiniteChain(T), [0.0, 1.0, 2.0])


def test_random_reversible_chain_is_reversible():
    ch = random_reversible_chain(np.random.default_rng(10), 6)
    assert ch.is_reversible()


# --------------------------------------------------------------------------- Hellinger and L1


def _l1_normals(m1, s1, m2, s2):
    f = lambda x: abs(stats.norm.pdf(x, m1, s1) - stats.norm.pdf(x, m2, s2))
    lo, hi = min(m1 - 12 * s1, m2 - 12 * s2), max(m1 + 12 * s1, m2 + 12 * s2)
    return integrate.quad(f, lo, hi, limit=400, points=[m1, m2])[0]


def test_hellinger_closed_form():
    assert hellinger_normal(0, 1, 0, 2) ** 2 == pytest.approx(1 - math.sqrt(4 / 5))
    bc = integrate.quad(lambda x: np.sqrt(stats.norm.pdf(x, 0.3, 1.2) * stats.norm.pdf(x, -0.5, 0.7)), -20, 20)[0]
    assert hellinger_normal(0.3, 1.2, -0.5, 0.7) == pytest.approx(math.sqrt(1 - bc), rel=1e-8)
    assert hellinger_normal(1, 1, 1, 1) == 0.0
    with pytest.raises(ContractViolation):
        hellinger_normal(0, 0, 0, 1)


def test_l1_and_hellinger_inequalities():
    rng = np.random.default_rng(11)
    for _ in range(50):
        m1, m2 = rng.normal(0, 2, 2)
        s1, s2 = rng.uniform(0.2, 3, 2)
        H = hellinger_normal(m1, s1, m2, s2)
        L1 = _l1_normals(m1, s1, m2, s2)
        assert 2 * H * H <= L1 + 1e-8
        assert L1 <= 2 * math.sqrt(2) * H + 1e-8


def test_l1_can_exceed_twice_hellinger():
    # small location shift: L1 ~ 0.80 d while 2H ~ 0.71 d, so L1 <= 2H is not a valid bound
    d = 0.1
    H = hellinger_normal(0, 1, d, 1)
    L1 = 2 * (2 * stats.norm.cdf(d / 2) - 1)
    assert L1 == pytest.approx(_l1_normals(0, 1, d, 1), rel=1e-8)
    assert L1 > 2 * H


# --------------------------------------------------------------------------- posterior drift


def _conjugate(y, t, prior_sd=10.0):
    prec = 1 / prior_sd**2 + t
    return np.sum(y[:t]) / prec, 1 / math.sqrt(prec)


def test_posterior_drift_single_observation():
    grid = np.linspace(-60, 60, 120_001)
    a = normal_mean_drift([0.7], grid=grid)
    m, s = _conjugate(np.array([0.7]), 1)
    want = 0.5 * _l1_normals(0.0, 10.0, m, s)
    assert a[0] == pytest.approx(want, abs=1e-4)


def test_posterior_drift_repeated_observations_decreases():
    a = normal_mean_drift(np.zeros(50))
    assert np.all(np.diff(a[1:]) < 0)


def test_posterior_drift_rate_and_hellinger_bound():
    T = 200
    rng = np.random.default_rng(12)
    curves = []
    for _ in range(100):
        y = rng.normal(0.5, 1.0, T)
        a = normal_mean_drift(y)
        curves.append(a)
        for t in (2, 10, 50, 200):
            m1, s1 = _conjugate(y, t - 1)
            m2, s2 = _conjugate(y, t)
            assert a[t - 1] <= math.sqrt(2) * hellinger_normal(m1, s1, m2, s2) + 1e-6
    mean = np.mean(curves, axis=0)
    t = np.arange(20, T + 1)
    slope = np.polyfit(np.log(t), np.log(mean[t - 1]), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.2)


# --------------------------------------------------------------------------- suites


def test_run_suite_small():
    reps = run_suite("all", 5, 0)
    assert len(reps) == 7 and all(r.passed for r in reps)
    assert all(r.instances == 5 for r in reps)
    with pytest.raises(ValueError):
        run_suite("nope", 1, 0)


def test_run_suite_is_deterministic():
    a = run_suite("smcmc", 3, 42)[0]
    b = run_suite("smcmc", 3, 42)[0]
    assert a.margins == b.margins
