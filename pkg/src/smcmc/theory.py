"""Exact finite-state checks of the convergence bounds behind sequential MCMC.

Every quantity is computed exactly (up to floating point) from explicit transition
matrices, so a reported violation means either the bound or its implementation
is wrong.

Conventions
-----------
``rho(T) = max_x ||T(x, .) - pi||_1`` (the full L1 norm, not halved).  With this
constant ``||p T - pi||_1 <= rho ||p - pi||_1`` for every ``p``, because
``(p - pi) T = sum_x (p(x) - pi(x)) (T(x, .) - pi)``.  The halved constant is too
small: the symmetric two-state chain with flip probability 0.1 contracts at 0.8
while ``0.5 * max_x ||T(x, .) - pi||_1 = 0.4``.

The per-step bound for a sequence of targets is stated for the total-variation
error ``0.5 * ||. ||_1`` (the quantity a coupling controls); the simpler
``sum_s (prod_{u>=s} eps_u) * 2 alpha_s`` bound is checked for the L1 error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "TOL",
    "ContractViolation",
    "CertificateError",
    "FiniteChain",
    "CheckReport",
    "stationary",
    "random_chain",
    "random_reversible_chain",
    "drifting_sequence",
    "l1_distance",
    "tv_distance",
    "uniform_rho",
    "dobrushin",
    "minorization_rho",
    "check_universal",
    "check_dobrushin_dominance",
    "check_minorization_dominance",
    "DriftCertificate",
    "verify_certificate",
    "search_certificate",
    "drift_bound",
    "check_drift",
    "SmcmcInstance",
    "smcmc_bound_check",
    "v_norm",
    "v_rho",
    "search_v",
    "v_norm_check",
    "spectral_acf_check",
    "hellinger_normal",
    "posterior_drift_curve",
    "normal_mean_drift",
    "run_suite",
    "SUITES",
]

TOL = 1e-12


class ContractViolation(ValueError):
    """Input does not satisfy an operation's precondition."""


class CertificateError(ValueError):
    """A drift/minorization certificate fails its own conditions."""


# --------------------------------------------------------------------------- chains


def stationary(T: np.ndarray) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix (least squares on piT = pi, sum 1)."""
    T = np.asarray(T, dtype=float)
    n = len(T)
    A = np.vstack([T.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


@dataclass
class FiniteChain:
    T: np.ndarray
    pi: np.ndarray | None = None

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        if self.T.ndim != 2 or self.T.shape[0] != self.T.shape[1]:
            raise ContractViolation("transition matrix must be square")
        if np.any(self.T < 0) or np.abs(self.T.sum(axis=1) - 1).max() > 1e-12:
            raise ContractViolation("rows must be probability vectors")
        if self.pi is None:
            self.pi = stationary(self.T)
        self.pi = np.asarray(self.pi, dtype=float)
        if np.abs(self.pi @ self.T - self.pi).max() > 1e-10:
            raise ContractViolation("pi is not stationary for T")

    @property
    def n(self) -> int:
        return len(self.T)

    def evolve(self, p: np.ndarray, steps: int = 1) -> np.ndarray:
        for _ in range(steps):
            p = p @ self.T
        return p

    def is_reversible(self, tol: float = 1e-10) -> bool:
        flow = self.pi[:, None] * self.T
        return bool(np.abs(flow - flow.T).max() <= tol)


def random_chain(rng: np.random.Generator, n: int, max_mix: float = 0.5) -> FiniteChain:
    """``T = (1 - a) 1 nu^T + a D`` with Dirichlet(1) rows in ``D`` and ``a ~ U(0, max_mix)``.

    Then ``T(x, .) - pi = a (D(x, .) - pi D)`` so ``rho(T) <= 2a < 1``.
    """
    nu = rng.dirichlet(np.ones(n))
    D = rng.dirichlet(np.ones(n), size=n)
    a = rng.uniform(0.0, max_mix)
    T = (1 - a) * nu[None, :] + a * D
    T /= T.sum(axis=1, keepdims=True)
    return FiniteChain(T)


def random_reversible_chain(rng: np.random.Generator, n: int, laziness: tuple[float, float] = (0.7, 0.95)) -> FiniteChain:
    """Lazy Metropolis chain for a Dirichlet target: reversible, all eigenvalues >= 0.

    High laziness gives a slowly mixing ("sticky") chain.
    """
    pi = rng.dirichlet(np.ones(n))
    prop = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(prop, 0.0)
    acc = np.minimum(1.0, pi[None, :] / pi[:, None])
    M = prop * acc
    np.fill_diagonal(M, 1.0 - M.sum(axis=1))
    g = rng.uniform(*laziness)
    T = g * np.eye(n) + (1 - g) * M
    return FiniteChain(T, pi)


def drifting_sequence(rng: np.random.Generator, n: int, steps: int, step_size: float = 0.1) -> list[FiniteChain]:
    """Chains whose targets move slowly: ``T_t = (1 - s) T_{t-1} + s T'`` with fresh ``T'``.

    Convex combinations keep the ``random_chain`` form, so every ``rho(T_t) < 1``.
    """
    chains = [random_chain(rng, n)]
    for _ in range(steps):
        T = (1 - step_size) * chains[-1].T + step_size * random_chain(rng, n).T
        T /= T.sum(axis=1, keepdims=True)
        chains.append(FiniteChain(T))
    return chains


# --------------------------------------------------------------------------- coefficients


def l1_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ContractViolation("distributions must have the same length")
    return float(np.abs(p - q).sum())


def tv_distance(p, q) -> float:
    return 0.5 * l1_distance(p, q)


def uniform_rho(chain: FiniteChain) -> float:
    """``max_x ||T(x, .) - pi||_1``."""
    return float(np.abs(chain.T - chain.pi[None, :]).sum(axis=1).max())


def dobrushin(chain: FiniteChain) -> float:
    """``max_{x,y} ||T(x, .) - T(y, .)||_1``."""
    T = chain.T
    return float(np.abs(T[:, None, :] - T[None, :, :]).sum(axis=2).max())


def minorization_rho(chain: FiniteChain) -> float:
    """Smallest ``rho_m`` with ``T(x, y) >= (1 - rho_m) nu(y)`` for some probability ``nu``.

    The best ``nu`` is proportional to the column minima of ``T``.
    """
    return float(1.0 - chain.T.min(axis=0).sum())


# --------------------------------------------------------------------------- reports


@dataclass
class CheckReport:
    """Outcome of one check over one or more instances.

    ``margins`` are ``bound - value`` for every individual inequality; a violation
    is a margin below ``-TOL``.  ``flagged`` counts cases excluded by a documented
    caveat rather than failed.
    """

    name: str
    instances: int = 0
    margins: list[float] = field(default_factory=list)
    flagged: int = 0
    notes: list[str] = field(default_factory=list)

    def add(self, bound: float, value: float):
        self.margins.append(float(bound) - float(value))

    def merge(self, other: "CheckReport") -> "CheckReport":
        self.instances += other.instances
        self.margins.extend(other.margins)
        self.flagged += other.flagged
        self.notes.extend(other.notes)
        return self

    @property
    def checks(self) -> int:
        return len(self.margins)

    @property
    def violations(self) -> int:
        return int(np.sum(np.asarray(self.margins) < -TOL)) if self.margins else 0

    @property
    def max_violation(self) -> float:
        if not self.margins:
            return 0.0
        return float(max(0.0, -min(self.margins)))

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def percentiles(self, qs=(0, 50, 100)) -> list[float]:
        if not self.margins:
            return [float("nan")] * len(qs)
        return [float(v) for v in np.percentile(self.margins, qs)]


# --------------------------------------------------------------------------- uniform ergodicity


def check_universal(chain: FiniteChain, p0, t_max: int) -> CheckReport:
    """``||p0 T^t - pi||_1 <= rho^t ||p0 - pi||_1`` for ``t = 1..t_max``."""
    rho = uniform_rho(chain)
    if rho >= 1:
        raise ContractViolation(f"rho = {rho} is not below 1")
    rep = CheckReport("check_universal", instances=1)
    p = np.asarray(p0, dtype=float)
    e0 = l1_distance(p, chain.pi)
    for t in range(1, t_max + 1):
        p = p @ chain.T
        rep.add(rho ** t * e0, l1_distance(p, chain.pi))
    return rep


def check_dobrushin_dominance(chain: FiniteChain) -> CheckReport:
    """``max_x ||T(x,.) - pi||_1 <= max_{x,y} ||T(x,.) - T(y,.)||_1``."""
    rep = CheckReport("check_dobrushin_dominance", instances=1)
    rep.add(dobrushin(chain), uniform_rho(chain))
    return rep


def check_minorization_dominance(chain: FiniteChain) -> CheckReport:
    """A minorisation constant ``rho_m`` gives ``max_x ||T(x,.) - pi||_1 <= 2 rho_m``."""
    rep = CheckReport("check_minorization_dominance", instances=1)
    rep.add(2.0 * minorization_rho(chain), uniform_rho(chain))
    return rep


# --------------------------------------------------------------------------- drift bound


@dataclass
class DriftCertificate:
    """``V >= 1``, small set ``C`` (boolean mask) and constants for the drift bound."""

    V: np.ndarray
    C: np.ndarray
    rho: float
    lam: float
    b: float

    @property
    def B(self) -> float:
        return 1.0 + self.b / self.lam


def verify_certificate(chain: FiniteChain, cert: DriftCertificate, tol: float = TOL) -> None:
    """Raise :class:`CertificateError` unless both conditions hold.

    1. ``max_{x in C} ||T(x,.) - pi||_1 <= rho < 1``
    2. ``(T V)(x) <= lam V(x) + b 1_C(x)`` for all ``x``, with ``0 < lam < 1``.
    """
    V = np.asarray(cert.V, dtype=float)
    C = np.asarray(cert.C, dtype=bool)
    if V.shape != (chain.n,) or C.shape != (chain.n,):
        raise CertificateError("V and C must have one entry per state")
    if np.any(V < 1):
        raise CertificateError("V must be >= 1")
    if not C.any():
        raise CertificateError("C must be non-empty")
    if not 0 < cert.lam < 1:
        raise CertificateError("lambda must lie in (0, 1)")
    if not 0 <= cert.rho < 1:
        raise CertificateError("rho must lie in [0, 1)")
    if cert.b < 0:
        raise CertificateError("b must be non-negative")
    rc = np.abs(chain.T[C] - chain.pi[None, :]).sum(axis=1).max()
    if rc > cert.rho + tol:
        raise CertificateError(f"sup over C of ||T(x,.) - pi||_1 = {rc} exceeds rho = {cert.rho}")
    TV = chain.T @ V
    slack = cert.lam * V + cert.b * C - TV
    if slack.min() < -tol * max(1.0, float(V.max())):
        raise CertificateError(f"drift condition fails by {-slack.min()}")


def _hitting_times(T: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Expected number of steps to enter ``C`` (0 on ``C``)."""
    out = ~C
    h = np.zeros(len(T))
    if out.any():
        A = np.eye(out.sum()) - T[np.ix_(out, out)]
        h[out] = np.linalg.solve(A, np.ones(out.sum()))
    return h


def _optimized_rate(cert: DriftCertificate) -> float:
    lr, ll, lB = math.log(max(cert.rho, 1e-300)), math.log(cert.lam), math.log(cert.B)
    if cert.rho == 0:
        return cert.lam
    return math.exp(lr * ll / (lr - lB))


def search_certificate(chain: FiniteChain, scales: Sequence[float] = (0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0)) -> DriftCertificate:
    """Grid search over small sets and hitting-time potentials.

    For every non-empty ``C`` with ``max_{x in C} ||T(x,.)-pi||_1 < 1`` and every
    ``V = 1 + s * (hitting time of C)``, the tightest ``lam`` and ``b`` are read
    off; ``V = 1, C = X`` with a grid of ``lam`` is always included.  The
    certificate with the smallest optimised geometric rate is returned.
    """
    n = chain.n
    dev = np.abs(chain.T - chain.pi[None, :]).sum(axis=1)
    best: DriftCertificate | None = None
    best_rate = np.inf

    def consider(cert):
        nonlocal best, best_rate
        try:
            verify_certificate(chain, cert)
        except CertificateError:
            return
        r = _optimized_rate(cert)
        if r < best_rate:
            best, best_rate = cert, r

    whole = np.ones(n, dtype=bool)
    for lam in (0.1, 0.3, 0.5, 0.7, 0.9):
        if dev.max() < 1:
            consider(DriftCertificate(np.ones(n), whole, float(dev.max()), lam, 1.0 - lam))
    for size in range(1, n):
        for idx in itertools.combinations(range(n), size):
            C = np.zeros(n, dtype=bool)
            C[list(idx)] = True
            rc = float(dev[C].max())
            if rc >= 1:
                continue
            h = _hitting_times(chain.T, C)
            for s in scales:
                V = 1.0 + s * h
                TV = chain.T @ V
                lam = float((TV[~C] / V[~C]).max())
                if not 0 < lam < 1:
                    continue
                b = float(max(0.0, (TV[C] - lam * V[C]).max()))
                consider(DriftCertificate(V, C, rc, lam, b))
    if best is None:
        raise CertificateError("no certificate found")
    return best


def drift_bound(chain: FiniteChain, V, C, rho: float, lam: float, b: float, p0, t: int, j: int) -> float:
    """``rho^j + lam^t B^(j-1) Vbar`` after validating the certificate.

    Raises :class:`CertificateError` if the certificate is invalid and
    :class:`AssertionError` if the exact error exceeds the bound.
    """
    if not 1 <= j <= t:
        raise ContractViolation("need 1 <= j <= t")
    cert = DriftCertificate(np.asarray(V, float), np.asarray(C, bool), rho, lam, b)
    verify_certificate(chain, cert)
    p0 = np.asarray(p0, dtype=float)
    bound = rho ** j + lam ** t * cert.B ** (j - 1) * float(cert.V @ p0)
    err = l1_distance(chain.evolve(p0, t), chain.pi)
    assert err <= bound + TOL, f"drift bound violated: {err} > {bound}"
    return float(bound)


def check_drift(chain: FiniteChain, cert: DriftCertificate, p0, t_max: int) -> CheckReport:
    """Exact error against the drift bound for every ``t <= t_max`` and every ``j <= t``."""
    verify_certificate(chain, cert)
    rep = CheckReport("drift_bound", instances=1)
    p = np.asarray(p0, dtype=float)
    Vbar = float(cert.V @ p)
    for t in range(1, t_max + 1):
        p = p @ chain.T
        err = l1_distance(p, chain.pi)
        j = np.arange(1, t + 1)
        with np.errstate(over="ignore"):
            bounds = cert.rho ** j + cert.lam ** t * cert.B ** (j - 1.0) * Vbar
        for bd in bounds:
            rep.add(bd, err)
    return rep


# --------------------------------------------------------------------------- sequence of targets


@dataclass
class SmcmcInstance:
    """``chains[0]`` defines ``pi_0``; ``chains[t]`` with ``m[t-1]`` sweeps is step ``t``."""

    chains: list[FiniteChain]
    m: list[int]
    p0: np.ndarray | None = None

    def __post_init__(self):
        if len(self.m) != len(self.chains) - 1:
            raise ContractViolation("need one sweep count per step after the initial chain")
        n = self.chains[0].n
        if any(c.n != n for c in self.chains):
            raise ContractViolation("all chains must share a state space")
        if self.p0 is None:
            self.p0 = self.chains[0].pi.copy()


def smcmc_bound_check(inst: SmcmcInstance) -> tuple[CheckReport, dict[str, np.ndarray]]:
    """Exact evolution of ``Q_t ... Q_1 pi_0`` against both per-step bounds.

    Checks, for every step ``t``,

    * TV error ``<= sum_s {prod_{u=s+1}^t eps_u (1 - alpha_u)} eps_s alpha_s``
    * L1 error ``<= sum_s {prod_{u=s}^t eps_u} 2 alpha_s``
    * the first bound ``<=`` half the second

    with ``eps_t = rho_t^{m_t}`` and ``alpha_t = 0.5 ||pi_t - pi_{t-1}||_1``.
    """
    rep = CheckReport("smcmc_bound_check", instances=1)
    p = np.asarray(inst.p0, dtype=float)
    prev = inst.chains[0].pi
    full = 0.0
    weak = 0.0
    rows = {k: [] for k in ("l1", "tv", "full", "weak", "eps", "alpha")}
    for chain, m in zip(inst.chains[1:], inst.m):
        rho = uniform_rho(chain)
        if rho >= 1:
            raise ContractViolation(f"rho_t = {rho} is not below 1")
        eps = rho ** m
        alpha = tv_distance(chain.pi, prev)
        p = chain.evolve(p, m)
        full = eps * (1 - alpha) * full + eps * alpha
        weak = eps * (weak + 2 * alpha)
        l1 = l1_distance(p, chain.pi)
        rep.add(full, 0.5 * l1)
        rep.add(weak, l1)
        rep.add(0.5 * weak, full)
        for k, v in zip(rows, (l1, 0.5 * l1, full, weak, eps, alpha)):
            rows[k].append(v)
        prev = chain.pi
    return rep, {k: np.asarray(v) for k, v in rows.items()}


# --------------------------------------------------------------------------- V-norm


def v_norm(mu, V) -> float:
    """``sup_{|f| <= V} |mu(f)| = sum |mu_i| V_i`` (attained at ``f = V sign(mu)``)."""
    return float(np.abs(np.asarray(mu, float)) @ np.asarray(V, float))


def v_rho(chain: FiniteChain, V) -> float:
    """Smallest ``rho`` with ``||T(x,.) - pi||_V <= V(x) rho`` at every state."""
    V = np.asarray(V, dtype=float)
    return float(((np.abs(chain.T - chain.pi[None, :]) @ V) / V).max())


def search_v(chain: FiniteChain, rng: np.random.Generator, candidates: int = 200) -> tuple[np.ndarray, float]:
    """Random search over ``V >= 1`` for the smallest ``v_rho``; ``V = 1`` is always tried."""
    best_V = np.ones(chain.n)
    best = v_rho(chain, best_V)
    for _ in range(candidates):
        V = 1.0 + rng.exponential(2.0, size=chain.n) * (rng.random(chain.n) < 0.7)
        r = v_rho(chain, V)
        if r < best:
            best_V, best = V, r
    return best_V, best


def v_norm_check(chain: FiniteChain, V, p0, t_max: int) -> CheckReport:
    """``||p0 T^t - pi||_V <= rho^t ||p0 - pi||_V`` with ``rho = v_rho(chain, V)``."""
    V = np.asarray(V, dtype=float)
    if np.any(V < 1):
        raise ContractViolation("V must be >= 1")
    rho = v_rho(chain, V)
    if rho >= 1:
        raise ContractViolation(f"V-norm contraction {rho} is not below 1")
    rep = CheckReport("v_norm_check", instances=1)
    p = np.asarray(p0, dtype=float)
    e0 = v_norm(p - chain.pi, V)
    for t in range(1, t_max + 1):
        p = p @ chain.T
        rep.add(rho ** t * e0, v_norm(p - chain.pi, V))
    return rep


# --------------------------------------------------------------------------- spectral


@dataclass
class SpectralResult:
    lambda1: float
    rate: float
    t: int
    overlap: float
    flagged: bool
    acf: np.ndarray

    @property
    def rel_error(self) -> float:
        return abs(self.rate - self.lambda1) / self.lambda1


def spectral_acf_check(chain: FiniteChain, h, t_max: int = 2000, target: float = 1e-9, tol: float = 0.05):
    """Decay rate of the stationary autocorrelation of ``h(X_t)`` against ``|lambda_1|``.

    ``f(t) = corr(h(X_0), h(X_t))`` is computed exactly by evolving ``h`` under
    ``T``; the rate ``|f(t)|^(1/t)`` is read at the first ``t`` where ``|f|`` drops
    below ``target`` (or at ``t_max``).  ``lambda_1`` is the largest-modulus
    eigenvalue on mean-zero functions.  When the projection of ``h`` on the
    corresponding eigenfunction is too small to show at that horizon, the case
    is flagged instead of failed.
    """
    if not chain.is_reversible():
        raise ContractViolation("spectral check needs a reversible chain")
    pi = chain.pi
    h = np.asarray(h, dtype=float)
    h = h - pi @ h
    var = float(pi @ (h * h))
    if var <= 1e-24:
        raise ContractViolation("h is constant under pi")
    s = np.sqrt(pi)
    S = s[:, None] * chain.T / s[None, :]
    S = 0.5 * (S + S.T)
    w, U = np.linalg.eigh(S)
    top = np.argmax(np.abs(U.T @ s))  # eigenvector sqrt(pi) carries eigenvalue 1
    keep = np.ones(len(w), dtype=bool)
    keep[top] = False
    mods = np.abs(w[keep])
    lam1 = float(mods.max())
    # squared pi-weighted projection of h on the top eigenspace, relative to var
    coords = U.T @ (s * h)
    lead = keep & np.isclose(np.abs(w), lam1, rtol=1e-9, atol=1e-14)
    overlap = float((coords[lead] ** 2).sum() / var)

    g = h.copy()
    acf = []
    t_used = t_max
    for t in range(1, t_max + 1):
        g = chain.T @ g
        f = float(pi @ (h * g)) / var
        acf.append(f)
        if abs(f) <= target:
            t_used = t
            break
    f_t = abs(acf[-1])
    rate = f_t ** (1.0 / t_used) if f_t > 0 else 0.0
    flagged = overlap ** (1.0 / t_used) < 1.0 - tol
    return SpectralResult(lam1, rate, t_used, overlap, bool(flagged), np.asarray(acf))


# --------------------------------------------------------------------------- posterior drift


def hellinger_normal(mu1: float, s1: float, mu2: float, s2: float) -> float:
    """Hellinger distance ``H`` with ``H^2 = 1 - BC`` between two normals."""
    if s1 <= 0 or s2 <= 0:
        raise ContractViolation("standard deviations must be positive")
    ss = s1 * s1 + s2 * s2
    h2 = 1.0 - math.sqrt(2.0 * s1 * s2 / ss) * math.exp(-0.25 * (mu1 - mu2) ** 2 / ss)
    return math.sqrt(max(h2, 0.0))


def posterior_drift_curve(log_prior, log_lik) -> np.ndarray:
    """``alpha_t = 0.5 ||pi_t - pi_{t-1}||_1`` for posteriors on a finite grid.

    ``log_prior`` has shape (K,); ``log_lik[t-1]`` is the log likelihood of the
    ``t``-th observation at each grid point.
    """
    lp = np.asarray(log_prior, dtype=float)
    ll = np.atleast_2d(np.asarray(log_lik, dtype=float))
    cur = lp - logsumexp(lp)
    prev = np.exp(cur)
    out = np.empty(len(ll))
    for t, row in enumerate(ll):
        cur = cur + row
        cur = cur - logsumexp(cur)
        p = np.exp(cur)
        out[t] = 0.5 * np.abs(p - prev).sum()
        prev = p
    return out


def normal_mean_drift(y, sigma: float = 1.0, prior_sd: float = 10.0, grid=None) -> np.ndarray:
    """Drift curve for the normal-mean model with known ``sigma`` on a fine grid."""
    y = np.asarray(y, dtype=float)
    if grid is None:
        grid = np.linspace(-6.0, 6.0, 12001)
    lp = -0.5 * (grid / prior_sd) ** 2
    ll = -0.5 * ((y[:, None] - grid[None, :]) / sigma) ** 2
    return posterior_drift_curve(lp, ll)


# --------------------------------------------------------------------------- suites


def _p0(rng, n):
    return rng.dirichlet(np.full(n, 0.3))


def _suite_universal(rng, rep):
    n = int(rng.integers(4, 7))
    ch = random_chain(rng, n)
    rep.merge(check_universal(ch, _p0(rng, n), 50))


def _suite_dobrushin(rng, rep):
    ch = random_chain(rng, int(rng.integers(4, 7)))
    rep.merge(check_dobrushin_dominance(ch))


def _suite_minorization(rng, rep):
    ch = random_chain(rng, int(rng.integers(4, 7)))
    rep.merge(check_minorization_dominance(ch))


def _suite_drift(rng, rep):
    n = int(rng.integers(4, 7))
    ch = random_chain(rng, n)
    rep.merge(check_drift(ch, search_certificate(ch), _p0(rng, n), 30))


def _suite_smcmc(rng, rep):
    n = int(rng.integers(4, 7))
    chains = drifting_sequence(rng, n, 20)
    m = [int(v) for v in rng.integers(1, 6, size=20)]
    rep.merge(smcmc_bound_check(SmcmcInstance(chains, m))[0])


def _suite_vnorm(rng, rep):
    n = int(rng.integers(4, 7))
    ch = random_chain(rng, n)
    V, _ = search_v(ch, rng, 50)
    rep.merge(v_norm_check(ch, V, _p0(rng, n), 50))


def _suite_spectral(rng, rep):
    n = int(rng.integers(4, 7))
    ch = random_reversible_chain(rng, n)
    res = spectral_acf_check(ch, rng.standard_normal(n))
    rep.instances += 1
    if res.flagged:
        rep.flagged += 1
        rep.notes.append(f"overlap {res.overlap:.3g} too small at t={res.t}")
    else:
        rep.add(0.05, res.rel_error)


SUITES: dict[str, tuple[str, Callable]] = {
    "universal": ("check_universal", _suite_universal),
    "dobrushin": ("check_dobrushin_dominance", _suite_dobrushin),
    "minorization": ("check_minorization_dominance", _suite_minorization),
    "drift": ("drift_bound", _suite_drift),
    "smcmc": ("smcmc_bound_check", _suite_smcmc),
    "vnorm": ("v_norm_check", _suite_vnorm),
    "spectral": ("spectral_acf_check", _suite_spectral),
}


def run_suite(name: str, instances: int, seed: int) -> list[CheckReport]:
    """Run one named suite (or ``"all"``) over random instances.

    Each suite draws its instances from its own child of ``seed``.
    """
    names = list(SUITES) if name == "all" else [name]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite {unknown[0]!r}; choose from {sorted(SUITES)} or 'all'")
    reports = []
    children = np.random.SeedSequence(seed).spawn(len(SUITES))
    for key, child in zip(SUITES, children):
        if key not in names:
            continue
        label, fn = SUITES[key]
        rng = np.random.default_rng(child)
        rep = CheckReport(label)
        for _ in range(instances):
            fn(rng, rep)
        reports.append(rep)
    return reports
