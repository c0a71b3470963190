"""Finite Gaussian mixture plug-in with exchangeable conjugate priors.

Model::

    y_i | z_i = j ~ N(mu_j, 1/lambda_j)
    P(z_i = j)    = w_j
    mu_j ~ N(zeta, 1/kappa),  lambda_j ~ Gamma(alpha, rate=beta),  w ~ Dirichlet(delta, ..., delta)

The transition kernel is a systematic Gibbs sweep z -> w -> lambda -> mu.  The
jumping kernel draws the labels of newly arrived observations from their exact
full conditional, which needs no other coordinate to move.

All kernels are vectorised over a group of chains; chain ``i`` only ever draws
from ``rngs[i]`` so results do not depend on how chains are grouped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .engine import Ensemble, KernelSuite, ParameterVector
from .sampling import gamma_from_uniforms, gamma_uniforms_needed, normals_from_uniforms, stacked_uniforms

__all__ = [
    "MixtureHyper",
    "MixtureState",
    "BENCHMARK_TRUTH",
    "simulate_data",
    "responsibilities",
    "gibbs_sweep",
    "gibbs_sweep_batch",
    "jump_new_indicators",
    "jump_batch",
    "log_posterior",
    "log_likelihood",
    "sorted_mean_summary",
    "sorted_means_sd",
    "MixturePlugin",
]


@dataclass(frozen=True)
class MixtureHyper:
    zeta: float = 0.0
    kappa: float = 0.01
    alpha: float = 1.0
    beta: float = 2.0
    delta: float = 1.0
    k: int = 4

    def __post_init__(self):
        if min(self.kappa, self.alpha, self.beta, self.delta) <= 0:
            raise ValueError("kappa, alpha, beta and delta must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class MixtureState:
    mu: np.ndarray
    lam: np.ndarray
    w: np.ndarray
    z: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.z = np.asarray(self.z, dtype=np.int64)
        k = len(self.mu)
        if len(self.lam) != k or len(self.w) != k:
            raise ValueError("mu, lam and w must have equal length")
        if np.any(self.lam <= 0):
            raise ValueError("precisions must be positive")
        if np.any(self.w < 0) or abs(self.w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must lie on the simplex")
        if self.z.size and (self.z.min() < 0 or self.z.max() >= k):
            raise ValueError("labels out of range")

    @property
    def k(self) -> int:
        return len(self.mu)

    def to_vector(self) -> ParameterVector:
        return ParameterVector(
            (("mu", self.mu.copy()), ("lam", self.lam.copy()), ("w", self.w.copy()), ("z", self.z.astype(float)))
        )

    @classmethod
    def from_vector(cls, pv: ParameterVector) -> "MixtureState":
        w = np.asarray(pv["w"], dtype=float)
        return cls(pv["mu"], pv["lam"], w / w.sum(), np.rint(pv["z"]).astype(np.int64))


# The simulation truth used by the benchmark.
BENCHMARK_TRUTH = MixtureState(
    mu=np.array([-3.0, 0.0, 3.0, 6.0]),
    lam=np.full(4, 0.55 ** -2),
    w=np.full(4, 0.25),
)


def simulate_data(truth: MixtureState, n: int, seed: int) -> np.ndarray:
    """``n`` iid draws from the mixture ``truth`` (labels ignored)."""
    rng = np.random.default_rng(seed)
    labels = rng.choice(truth.k, size=n, p=truth.w)
    return truth.mu[labels] + rng.standard_normal(n) / np.sqrt(truth.lam[labels])


# --------------------------------------------------------------------------- kernels


def _log_weights(y: np.ndarray, mu, lam, w) -> np.ndarray:
    """log w_j + log N(y_i; mu_j, 1/lam_j) for a batch of chains -> (C, k, n).

    Written as a quadratic in y so the whole batch is one stacked matmul.
    """
    coef = np.stack(
        [0.5 * np.log(lam) - 0.5 * lam * mu * mu - 0.5 * np.log(2 * np.pi), lam * mu, -0.5 * lam],
        axis=2,
    )
    basis = np.stack([np.ones_like(y), y, y * y])
    # log w added after the product so zero weights give -inf without NaN warnings
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    return coef @ basis + logw[..., None]


def responsibilities(state: MixtureState, y) -> np.ndarray:
    """``P(z_i = j | y_i, mu, lam, w)`` as an ``(n, k)`` array."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lw = _log_weights(y, state.mu[None], state.lam[None], state.w[None])[0].T
    return np.exp(lw - logsumexp(lw, axis=1, keepdims=True))


def _draw_labels(logits: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-cdf draw per (chain, observation) from ``(C, k, n)`` log weights."""
    k = logits.shape[1]
    top = logits[:, 0].copy()
    for j in range(1, k):
        np.maximum(top, logits[:, j], out=top)
    p = np.exp(logits - top[:, None])
    target = u * p.sum(axis=1)
    labels = np.zeros(u.shape, dtype=np.int64)
    acc = np.zeros(u.shape)
    for j in range(k - 1):
        acc += p[:, j]
        labels += acc < target
    return labels


def gibbs_sweep_batch(
    mu: np.ndarray,
    lam: np.ndarray,
    w: np.ndarray,
    y: np.ndarray,
    hyper: MixtureHyper,
    rngs: Sequence[np.random.Generator],
):
    """One Gibbs sweep for ``C`` chains at once; arrays have shape (C, k).

    Returns ``(mu, lam, w, z)`` with ``z`` of shape (C, n).
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0:
        raise ValueError("a Gibbs sweep needs at least one observation")
    C, k = mu.shape
    # one block of uniforms per chain: labels, then 2k gammas, then k normals
    ng = gamma_uniforms_needed(2 * k)
    u = stacked_uniforms(rngs, n + ng + k)

    z = _draw_labels(_log_weights(y, mu, lam, w), u[:, :n])
    counts = np.empty((C, k))
    s1 = np.empty((C, k))
    s2 = np.empty((C, k))
    yy = np.stack([y, y * y], axis=1)
    for j in range(k):
        mask = (z == j).astype(float)
        counts[:, j] = mask.sum(axis=1)
        s1[:, j], s2[:, j] = (mask @ yy).T

    shapes = np.concatenate([hyper.delta + counts, hyper.alpha + 0.5 * counts], axis=1)
    g = gamma_from_uniforms(shapes, u[:, n : n + ng], rngs)
    wg = g[:, :k]
    w_new = wg / wg.sum(axis=1, keepdims=True)

    # squared deviations around the current mu, from sufficient statistics
    ss = np.maximum(s2 - 2 * mu * s1 + counts * mu * mu, 0.0)
    lam_new = g[:, k:] / (hyper.beta + 0.5 * ss)
    # guard against a gamma draw underflowing to exactly zero
    lam_new = np.maximum(lam_new, np.finfo(float).tiny)

    prec = hyper.kappa + counts * lam_new
    mean = (hyper.kappa * hyper.zeta + lam_new * s1) / prec
    e = normals_from_uniforms(u[:, n + ng :])
    mu_new = mean + e / np.sqrt(prec)
    return mu_new, lam_new, w_new, z


def gibbs_sweep(state: MixtureState, y, hyper: MixtureHyper, rng: np.random.Generator) -> MixtureState:
    """Single-chain sweep; same random stream as the batched version for that chain.

    Results agree with the batched sweep up to floating-point summation order.
    """
    y = np.asarray(y, dtype=float)
    if len(state.z) != len(y):
        raise ValueError(f"state has {len(state.z)} labels but {len(y)} observations")
    mu, lam, w, z = gibbs_sweep_batch(state.mu[None], state.lam[None], state.w[None], y, hyper, [rng])
    return MixtureState(mu[0], lam[0], w[0], z[0])


def jump_batch(mu, lam, w, y_new, rngs: Sequence[np.random.Generator]) -> np.ndarray:
    """Exact-conditional labels for new observations, shape (C, len(y_new))."""
    y_new = np.atleast_1d(np.asarray(y_new, dtype=float))
    u = stacked_uniforms(rngs, len(y_new))
    return _draw_labels(_log_weights(y_new, mu, lam, w), u)


def jump_new_indicators(state: MixtureState, y_new, hyper: MixtureHyper, rng: np.random.Generator) -> MixtureState:
    """Append labels for ``y_new``; mu, lam, w and the old labels are untouched."""
    znew = jump_batch(state.mu[None], state.lam[None], state.w[None], y_new, [rng])[0]
    return MixtureState(state.mu, state.lam, state.w, np.concatenate([state.z, znew]))


def log_likelihood(y, mu, lam, w) -> np.ndarray:
    """Mixture log likelihood with labels summed out; broadcast over leading axes of mu."""
    mu = np.atleast_2d(mu)
    lam = np.atleast_2d(lam)
    w = np.atleast_2d(w)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return logsumexp(_log_weights(y, mu, lam, w), axis=1).sum(axis=1)


def log_prior(mu, lam, w, hyper: MixtureHyper) -> np.ndarray:
    """Unnormalised log prior density of (mu, lam, w), vectorised over rows."""
    mu = np.atleast_2d(mu)
    lam = np.atleast_2d(lam)
    w = np.atleast_2d(w)
    with np.errstate(divide="ignore"):
        lp = -0.5 * hyper.kappa * ((mu - hyper.zeta) ** 2).sum(axis=1)
        lp += ((hyper.alpha - 1) * np.log(lam) - hyper.beta * lam).sum(axis=1)
        lp += ((hyper.delta - 1) * np.log(w)).sum(axis=1)
    return lp


def log_posterior(y, mu, lam, w, hyper: MixtureHyper) -> np.ndarray:
    """Unnormalised log posterior of (mu, lam, w) with labels integrated out."""
    return log_prior(mu, lam, w, hyper) + log_likelihood(y, mu, lam, w)


# --------------------------------------------------------------------------- summaries


def sorted_means_sd(means) -> tuple[np.ndarray, float]:
    """Sort estimated component means and report their sample sd (ddof=1)."""
    s = np.sort(np.asarray(means, dtype=float))
    return s, float(np.std(s, ddof=1)) if len(s) > 1 else 0.0


def sorted_mean_summary(ens: Ensemble) -> tuple[np.ndarray, float]:
    """Posterior mean of each mu_j averaged over chains, sorted, plus its sd."""
    return sorted_means_sd(ens.blocks["mu"].mean(axis=0))


# --------------------------------------------------------------------------- plug-in


@dataclass
class MixturePlugin:
    """Engine plug-in for the mixture model.

    ``init_center`` and ``init_sd`` control the chains' starting means; precisions
    and weights are drawn from the prior and the label block starts empty.
    """

    hyper: MixtureHyper = field(default_factory=MixtureHyper)
    init_center: tuple[float, ...] | None = (-3.0, 0.0, 3.0, 6.0)
    init_sd: float = 0.1

    def __post_init__(self):
        if self.init_center is not None and len(self.init_center) != self.hyper.k:
            raise ValueError("init_center must have k entries")

    def prior_sampler(self, rng: np.random.Generator) -> ParameterVector:
        h = self.hyper
        if self.init_center is None:
            mu = h.zeta + rng.standard_normal(h.k) / np.sqrt(h.kappa)
        else:
            mu = np.asarray(self.init_center, dtype=float) + self.init_sd * rng.standard_normal(h.k)
        lam = rng.gamma(h.alpha, 1.0 / h.beta, size=h.k)
        w = rng.dirichlet(np.full(h.k, h.delta))
        return ParameterVector((("mu", mu), ("lam", lam), ("w", w), ("z", np.zeros(0))))

    def validate(self, batch) -> None:
        arr = np.asarray(batch, dtype=float)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ValueError("mixture observations must be finite scalars")

    def diag_components(self) -> list[tuple[str, int]]:
        k = self.hyper.k
        return [(b, j) for b in ("mu", "lam", "w") for j in range(k)]

    def make_suite(self, prefix, new) -> KernelSuite:
        y = np.asarray(prefix, dtype=float)
        y_new = np.asarray(new, dtype=float)
        hyper = self.hyper

        def jump(blocks, rngs):
            z = jump_batch(blocks["mu"], blocks["lam"], blocks["w"], y_new, rngs)
            return {"z": z.astype(float)}

        def transit(blocks, rngs):
            mu, lam, w, z = gibbs_sweep_batch(blocks["mu"], blocks["lam"], blocks["w"], y, hyper, rngs)
            return {"mu": mu, "lam": lam, "w": w, "z": z.astype(float)}

        return KernelSuite(jump, transit, self.diag_components(), len(y))

    def summarize(self, ens: Ensemble) -> dict[str, float]:
        s, sd = sorted_mean_summary(ens)
        out = {f"mean_{j + 1}": float(v) for j, v in enumerate(s)}
        out["sd"] = sd
        return out
