"""Probit regression with a Gaussian-process prior and a discrete bandwidth grid.

Model::

    y_i = 1{z_i > 0},   z_i = f(x_i) + e_i,   e_i ~ N(0, 1)
    f ~ GP(0, sigma2 * exp(-a_h^2 |x - x'|^2)),   h ~ uniform on {1..H}

Each chain's state is ``f`` (latent function at the design points), ``z``
(augmented latents) and ``h`` (grid index, stored as a float block of length 1).
The transition kernel is the sweep z -> F -> h.  The jumping kernel appends
``f(x_new)`` and ``z_new`` by alternating their full conditionals ``r`` times,
starting ``f(x_new)`` at its conditional prior mean.

Everything that depends only on the data (Cholesky factors, posterior precision
factors for F) is computed once per step and shared read-only by all chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import log_ndtr, ndtr, ndtri, ndtri_exp

from .cholesky import CholeskyCache
from .engine import Ensemble, KernelSuite, ParameterVector
from .sampling import stacked_uniforms

__all__ = [
    "GpConfig",
    "GpState",
    "build_grid",
    "grid_probabilities",
    "truncated_normal",
    "StepFactors",
    "gibbs_sweep_gp_batch",
    "gibbs_sweep_gp",
    "jump_batch",
    "jump_new_site",
    "predict",
    "predict_grid",
    "simulate_probit",
    "GpPlugin",
]


def grid_probabilities(H: int) -> np.ndarray:
    """``(h-1)/H`` for h = 2..H, with the first point moved to ``1/(2H)``."""
    p = np.arange(H, dtype=float) / H
    p[0] = 0.5 / H
    return p


def build_grid(H: int, power: float = 2.0, shape: float = 1.0, rate: float = 1.0) -> np.ndarray:
    """Quantiles of the prior ``a**power ~ Gamma(shape, rate)`` used as the bandwidth grid."""
    if H < 2:
        raise ValueError("H must be >= 2")
    if not (power > 0 and shape > 0 and rate > 0):
        raise ValueError("powered gamma prior needs positive power, shape and rate")
    q = stats.gamma(shape, scale=1.0 / rate).ppf(grid_probabilities(H))
    return q ** (1.0 / power)


@dataclass(frozen=True)
class GpConfig:
    H: int = 10
    power: float = 2.0
    shape: float = 1.0
    rate: float = 1.0
    sigma2: float = 1.0
    jitter: float = 1e-8
    r: int = 1
    n_diag: int = 10

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.n_diag < 1:
            raise ValueError("n_diag must be >= 1")


@dataclass
class GpState:
    f: np.ndarray
    z: np.ndarray
    h: int

    def to_vector(self) -> ParameterVector:
        return ParameterVector(
            (("f", np.asarray(self.f, float)), ("z", np.asarray(self.z, float)), ("h", np.array([float(self.h)])))
        )

    @classmethod
    def from_vector(cls, pv: ParameterVector) -> "GpState":
        return cls(np.asarray(pv["f"]), np.asarray(pv["z"]), int(pv["h"][0]))


def truncated_normal(mean: np.ndarray, y: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``N(mean, 1)`` truncated to (0, inf) where ``y == 1`` and (-inf, 0] elsewhere.

    Inverse-cdf in log space so deep tails stay accurate; ``u`` are uniforms.
    """
    mean = np.asarray(mean, dtype=float)
    pos = np.asarray(y) == 1
    s = np.where(pos, 1.0, -1.0)
    # for y=1: z = f - Phi^{-1}(u Phi(f)); for y=0 mirror the argument
    q = ndtri_exp(np.log(u) + log_ndtr(s * mean))
    z = mean - s * q
    return np.where(pos, np.maximum(z, np.finfo(float).tiny), np.minimum(z, 0.0))


# --------------------------------------------------------------------------- per-step factors


class StepFactors:
    """Data-only quantities for one step, built lazily per grid index.

    ``P_h = Q_h / sigma2 + I`` is the posterior precision of F given z and h; its
    lower Cholesky factor is computed the first time a chain sits at ``h``.
    """

    def __init__(self, cache: CholeskyCache, y: np.ndarray, sigma2: float):
        if cache.t != len(y):
            raise ValueError(f"cache horizon {cache.t} does not match {len(y)} observations")
        self.cache = cache
        self.y = np.asarray(y, dtype=np.int64)
        self.sigma2 = float(sigma2)
        self.t = cache.t
        # copies: the cache keeps growing while this step's kernels are in use
        self.Linv = cache.Linv.copy()
        self.Q = cache.Q.copy()
        self.logdet = cache.logdet.copy()
        self._R: dict[int, np.ndarray] = {}

    def precision_factor(self, h: int) -> np.ndarray:
        if h not in self._R:
            P = self.Q[h] / self.sigma2
            P[np.diag_indices_from(P)] += 1.0
            self._R[h] = cholesky(P, lower=True, check_finite=False)
        return self._R[h]

    def log_density_h(self, F: np.ndarray) -> np.ndarray:
        """Unnormalised log posterior of every grid index for each row of ``F`` -> (C, H)."""
        t = self.t
        quad = np.stack([((F @ self.Linv[h].T) ** 2).sum(axis=1) for h in range(len(self.logdet))], axis=1)
        return -0.5 * self.logdet[None, :] - 0.5 * t * math.log(self.sigma2) - 0.5 * quad / self.sigma2


def gibbs_sweep_gp_batch(
    f: np.ndarray, z: np.ndarray, h: np.ndarray, fac: StepFactors, rngs: Sequence[np.random.Generator]
):
    """One sweep z -> F -> h for ``C`` chains.  ``f``, ``z`` are (C, t); ``h`` is (C,) int."""
    C, t = f.shape
    if t != fac.t:
        raise ValueError(f"state has {t} sites but the factors cover {fac.t}")
    u = stacked_uniforms(rngs, 2 * t + 1)
    z = truncated_normal(f, fac.y[None, :], u[:, :t])

    e = ndtri(u[:, t : 2 * t])
    f = np.empty_like(z)
    for hv in np.unique(h):
        rows = np.nonzero(h == hv)[0]
        R = fac.precision_factor(int(hv))
        mean = cho_solve((R, True), z[rows].T, check_finite=False)
        noise = solve_triangular(R, e[rows].T, lower=True, trans="T", check_finite=False)
        f[rows] = (mean + noise).T

    lp = fac.log_density_h(f)
    p = np.exp(lp - lp.max(axis=1, keepdims=True))
    cdf = np.cumsum(p, axis=1)
    h_new = (cdf < (u[:, -1] * cdf[:, -1])[:, None]).sum(axis=1)
    h_new = np.minimum(h_new, lp.shape[1] - 1)
    return f, z, h_new


def gibbs_sweep_gp(state: GpState, y, cache: CholeskyCache, rng: np.random.Generator, sigma2: float = 1.0) -> GpState:
    """Single-chain sweep; draws match the batched kernel for that chain."""
    fac = StepFactors(cache, np.asarray(y), sigma2)
    f, z, h = gibbs_sweep_gp_batch(state.f[None], state.z[None], np.array([state.h]), fac, [rng])
    return GpState(f[0], z[0], int(h[0]))


def _conditional_prior(fac_prev_Linv: np.ndarray | None, cache: CholeskyCache, f: np.ndarray, h: np.ndarray, sigma2: float):
    """Mean and variance of f(x_new) given F for the latest appended point."""
    C = f.shape[0]
    var = np.empty(C)
    mean = np.zeros(C)
    for hv in np.unique(h):
        rows = np.nonzero(h == hv)[0]
        tm = cache.last[int(hv)]
        var[rows] = sigma2 * tm.d * tm.d
        if f.shape[1]:
            # B (Linv F) is the kriging mean: B = c^T L^{-T}
            mean[rows] = (f[rows] @ fac_prev_Linv[int(hv)].T) @ tm.B
    return mean, var


def jump_batch(
    f: np.ndarray,
    h: np.ndarray,
    y_new: int,
    cache: CholeskyCache,
    prev_Linv: np.ndarray | None,
    r: int,
    sigma2: float,
    rngs: Sequence[np.random.Generator],
):
    """New ``(f_new, z_new)`` for every chain; ``cache`` must already hold ``x_new``."""
    m, v = _conditional_prior(prev_Linv, cache, f, h, sigma2)
    u = stacked_uniforms(rngs, 2 * r)
    yv = np.full(len(m), int(y_new))
    fn = m
    zn = m
    post_var = 1.0 / (1.0 / v + 1.0)
    for i in range(r):
        zn = truncated_normal(fn, yv, u[:, 2 * i])
        fn = post_var * (m / v + zn) + np.sqrt(post_var) * ndtri(u[:, 2 * i + 1])
    return fn, zn


def jump_new_site(
    state: GpState, y_new: int, cache: CholeskyCache, r: int, rng: np.random.Generator, sigma2: float = 1.0
) -> GpState:
    """Append ``(f(x_new), z_new)``; ``cache`` must already include ``x_new``."""
    t = len(state.f)
    if cache.t != t + 1:
        raise ValueError("append x_new to the cache before jumping")
    prev_Linv = cache.Linv[:, :t, :t]
    fn, zn = jump_batch(state.f[None], np.array([state.h]), y_new, cache, prev_Linv, r, sigma2, [rng])
    return GpState(np.append(state.f, fn[0]), np.append(state.z, zn[0]), state.h)


# --------------------------------------------------------------------------- prediction


def predict_grid(
    f: np.ndarray,
    h: np.ndarray,
    cache: CholeskyCache,
    x_star,
    sigma2: float = 1.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Probability that y = 1 at each row of ``x_star``, averaged over chains.

    By default the latent value is integrated out analytically,
    ``E Phi(f*) = Phi(m / sqrt(1 + v))`` with ``(m, v)`` the GP conditional given
    the chain's (F, h).  With ``rng`` a draw of ``f*`` per chain is used instead.
    """
    x_star = np.atleast_2d(np.asarray(x_star, dtype=float))
    C = f.shape[0]
    G = len(x_star)
    if cache.t == 0:
        m = np.zeros((C, G))
        v = np.full((C, G), sigma2 * (1.0 + cache.jitter))
    else:
        cross = cache.cross(x_star)
        m = np.empty((C, G))
        v = np.empty((C, G))
        for hv in np.unique(h):
            rows = np.nonzero(h == hv)[0]
            hv = int(hv)
            W = cache.Linv[hv] @ cross[hv]
            m[rows] = (f[rows] @ cache.Linv[hv].T) @ W
            v[rows] = np.maximum(sigma2 * (1.0 + cache.jitter - (W * W).sum(axis=0)), 0.0)[None, :]
    if rng is None:
        p = ndtr(m / np.sqrt(1.0 + v))
    else:
        p = ndtr(m + np.sqrt(v) * rng.standard_normal(m.shape))
    return p.mean(axis=0)


def predict(ens: Ensemble, x_star, cache: CholeskyCache, sigma2: float = 1.0, rng=None) -> float:
    """Posterior predictive probability at a single covariate vector."""
    f = ens.blocks["f"]
    h = np.rint(ens.blocks["h"][:, 0]).astype(np.int64)
    return float(predict_grid(f, h, cache, np.atleast_2d(x_star), sigma2, rng)[0])


# --------------------------------------------------------------------------- data


def simulate_probit(n: int, seed: int, dim: int = 2, a: float = 1.0, sigma2: float = 1.0):
    """Covariates uniform on [-2, 2]^dim and labels from a GP-probit draw."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, size=(n, dim))
    sq = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    K = sigma2 * np.exp(-a * a * sq) + 1e-8 * np.eye(n)
    fx = np.linalg.cholesky(K) @ rng.standard_normal(n)
    y = (fx + rng.standard_normal(n) > 0).astype(np.int64)
    return X, y


# --------------------------------------------------------------------------- plug-in


@dataclass
class GpPlugin:
    """Engine plug-in; observations are ``(x, y)`` pairs with ``x`` of length ``dim``.

    The plug-in owns the Cholesky cache and appends new covariates to it when the
    engine asks for the next step's kernels.  ``cache_cls`` can be swapped for
    :class:`~smcmc.cholesky.FreshCholeskyCache` to recompute factors each step.
    """

    dim: int = 2
    config: GpConfig = field(default_factory=GpConfig)
    cache_cls: type = CholeskyCache

    def __post_init__(self):
        self.grid = build_grid(self.config.H, self.config.power, self.config.shape, self.config.rate)
        self.cache = self.cache_cls(self.grid, self.dim, jitter=self.config.jitter)

    def prior_sampler(self, rng: np.random.Generator) -> ParameterVector:
        h = int(rng.integers(self.config.H))
        return ParameterVector((("f", np.zeros(0)), ("z", np.zeros(0)), ("h", np.array([float(h)]))))

    def validate(self, batch) -> None:
        for obs in batch:
            x, y = obs
            x = np.asarray(x, dtype=float)
            if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
                raise ValueError(f"covariate must be {self.dim} finite numbers, got {x!r}")
            if y not in (0, 1):
                raise ValueError(f"label must be 0 or 1, got {y!r}")

    def make_suite(self, prefix, new) -> KernelSuite:
        cfg = self.config
        cache = self.cache
        t0 = cache.t
        if t0 + len(new) != len(prefix):
            raise ValueError("cache out of step with the data prefix")
        # one entry per new site: (Linv before the append, append terms, label)
        plan = []
        for x, y in new:
            prev = cache.Linv.copy()
            cache.append(x)
            plan.append((prev, list(cache.last), int(y)))
        y_all = np.array([int(o[1]) for o in prefix], dtype=np.int64)
        fac = StepFactors(cache, y_all, cfg.sigma2)

        def jump(blocks, rngs):
            f = blocks["f"]
            h = np.rint(blocks["h"][:, 0]).astype(np.int64)
            fs, zs = [], []
            for prev, last, y in plan:
                view = _CacheView(last)
                fcur = np.concatenate([f] + [a[:, None] for a in fs], axis=1) if fs else f
                fn, zn = jump_batch(fcur, h, y, view, prev, cfg.r, cfg.sigma2, rngs)
                fs.append(fn)
                zs.append(zn)
            return {"f": np.stack(fs, axis=1), "z": np.stack(zs, axis=1)}

        def transit(blocks, rngs):
            h = np.rint(blocks["h"][:, 0]).astype(np.int64)
            f, z, hn = gibbs_sweep_gp_batch(blocks["f"], blocks["z"], h, fac, rngs)
            return {"f": f, "z": z, "h": hn.astype(float)[:, None]}

        diag = [("f", i) for i in range(min(cfg.n_diag, cache.t))]
        return KernelSuite(jump, transit, diag, cache.t)

    def summarize(self, ens: Ensemble) -> dict[str, float]:
        h = ens.blocks["h"][:, 0]
        return {"mean_h": float(h.mean()), "mean_a": float(self.grid[np.rint(h).astype(int)].mean())}


class _CacheView:
    """Just the ``last`` append terms, frozen for use inside a step's jump."""

    def __init__(self, last):
        self.last = last
