"""Comparators for the mixture benchmark.

* :func:`parallel_mcmc` runs ``L`` independent full-data Gibbs samplers for a fixed
  number of sweeps, typically matched to the total sweeps of a sequential run.
* :func:`smc_step` / :func:`run_smc` implement a reweight-resample-move particle
  sampler on ``(mu, lambda, w)`` with the labels summed out.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .engine import (
    ConfigurationError,
    Ensemble,
    ModelPlugin,
    ParameterVector,
    _apply_jump,
    _apply_transit,
    _Dispatcher,
    init_ensemble,
)
from .mixture import MixtureHyper, log_likelihood, log_posterior, sorted_means_sd

log = logging.getLogger(__name__)

__all__ = [
    "parallel_mcmc",
    "DegenerateWeightsError",
    "ParticleSet",
    "SmcStepInfo",
    "SmcReport",
    "ess",
    "resample",
    "prior_particles",
    "mh_move",
    "smc_step",
    "run_smc",
]


# --------------------------------------------------------------------------- parallel MCMC


def parallel_mcmc(
    data: Sequence,
    model: ModelPlugin,
    K: int,
    L: int,
    seed: int,
    *,
    workers: int = 1,
    chunk_size: int | None = 64,
) -> Ensemble:
    """``L`` independent chains, each run for ``K`` full-data transition sweeps.

    Chains start from ``model.prior_sampler``; the model's jumping kernel fills in
    the latent block for the whole data set before the first sweep.
    """
    if K < 1:
        raise ConfigurationError(f"K must be >= 1, got {K}")
    data = list(data)
    if not data:
        raise ConfigurationError("parallel MCMC needs data")
    model.validate(data)
    ens = init_ensemble(model.prior_sampler, L, seed)
    suite = model.make_suite(data, data)
    dispatch = _Dispatcher(L, chunk_size, workers)
    try:
        blocks = _apply_jump(ens, suite, dispatch)
        for _ in range(K):
            blocks = _apply_transit(blocks, suite, ens.rngs, dispatch)
    finally:
        dispatch.close()
    return Ensemble(blocks=blocks, rngs=ens.rngs, t=1, s=K + 1, history=[K + 1])


# --------------------------------------------------------------------------- SMC


class DegenerateWeightsError(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"all particle weights underflowed to zero at step {step}")
        self.step = step


@dataclass
class ParticleSet:
    """Particles stored block-wise, ``mu``, ``lam`` and ``w`` each of shape (N, k)."""

    mu: np.ndarray
    lam: np.ndarray
    w: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        N = len(self.weights)
        if N < 2:
            raise ValueError("a particle set needs N >= 2")
        for name in ("mu", "lam", "w"):
            if getattr(self, name).shape[0] != N:
                raise ValueError(f"{name} must have one row per particle")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")

    @property
    def N(self) -> int:
        return len(self.weights)

    @property
    def particles(self) -> list[ParameterVector]:
        return [
            ParameterVector((("mu", self.mu[i].copy()), ("lam", self.lam[i].copy()), ("w", self.w[i].copy())))
            for i in range(self.N)
        ]

    def select(self, idx: np.ndarray) -> "ParticleSet":
        N = len(idx)
        return ParticleSet(self.mu[idx], self.lam[idx], self.w[idx], np.full(N, 1.0 / N))

    def posterior_means(self) -> np.ndarray:
        return self.weights @ self.mu


def ess(weights) -> float:
    """Effective sample size ``1 / sum w_i^2`` of normalised weights."""
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def resample(weights, rng: np.random.Generator) -> np.ndarray:
    """Multinomial resampling; returns ancestor indices in increasing order."""
    w = np.asarray(weights, dtype=float)
    counts = rng.multinomial(len(w), w / w.sum())
    return np.repeat(np.arange(len(w)), counts)


def prior_particles(N: int, hyper: MixtureHyper, rng: np.random.Generator) -> ParticleSet:
    k = hyper.k
    mu = hyper.zeta + rng.standard_normal((N, k)) / np.sqrt(hyper.kappa)
    lam = rng.gamma(hyper.alpha, 1.0 / hyper.beta, size=(N, k))
    w = rng.dirichlet(np.full(k, hyper.delta), size=N)
    return ParticleSet(mu, lam, w, np.full(N, 1.0 / N))


def _alr(w: np.ndarray) -> np.ndarray:
    return np.log(w[:, :-1]) - np.log(w[:, -1:])


def _alr_inv(eta: np.ndarray) -> np.ndarray:
    full = np.concatenate([eta, np.zeros((len(eta), 1))], axis=1)
    return np.exp(full - logsumexp(full, axis=1, keepdims=True))


def _scale(x: np.ndarray, floor: float = 1e-3) -> np.ndarray:
    return np.maximum(0.5 * x.std(axis=0), floor)


TARGET_ACCEPTANCE = 0.3


def mh_move(
    ps: ParticleSet,
    y: np.ndarray,
    hyper: MixtureHyper,
    rng: np.random.Generator,
    sweeps: int,
    scales: tuple[np.ndarray, np.ndarray, np.ndarray | None] | None = None,
):
    """Random-walk Metropolis-Hastings on ``mu``, ``log lam`` and ``alr(w)``, block by block.

    Every block proposal is symmetric in the unconstrained coordinates, so the
    acceptance ratio is the posterior ratio times the Jacobians ``prod lam`` and
    ``prod w``.  Scales default to half the particle spread of each coordinate and
    are shared by all particles; between sweeps each block's scale is nudged
    towards ``TARGET_ACCEPTANCE`` using the population acceptance rate.
    Returns the moved set, per-block acceptance rates and the final scales.
    """
    mu, lam, w = ps.mu.copy(), ps.lam.copy(), ps.w.copy()
    N, k = mu.shape
    if scales is None:
        scales = (_scale(mu), _scale(np.log(lam)), _scale(_alr(w)) if k > 1 else None)
    s_mu, s_lam, s_w = (None if v is None else np.array(v, dtype=float) for v in scales)

    def target(m, l, ww):
        return log_posterior(y, m, l, ww, hyper) + np.log(l).sum(axis=1) + np.log(ww).sum(axis=1)

    cur = target(mu, lam, w)
    accepted = np.zeros(3)
    for _ in range(sweeps):
        rates = np.full(3, np.nan)
        for b in range(3):
            if b == 0:
                prop = (mu + s_mu * rng.standard_normal((N, k)), lam, w)
            elif b == 1:
                prop = (mu, lam * np.exp(s_lam * rng.standard_normal((N, k))), w)
            else:
                if s_w is None:
                    continue
                prop = (mu, lam, _alr_inv(_alr(w) + s_w * rng.standard_normal((N, k - 1))))
            new = target(*prop)
            with np.errstate(invalid="ignore"):
                acc = np.log(rng.random(N)) < new - cur
            mu = np.where(acc[:, None], prop[0], mu)
            lam = np.where(acc[:, None], prop[1], lam)
            w = np.where(acc[:, None], prop[2], w)
            cur = np.where(acc, new, cur)
            rates[b] = acc.mean()
        accepted += np.nan_to_num(rates)
        s_mu = s_mu * np.exp(rates[0] - TARGET_ACCEPTANCE)
        s_lam = s_lam * np.exp(rates[1] - TARGET_ACCEPTANCE)
        if s_w is not None:
            s_w = s_w * np.exp(rates[2] - TARGET_ACCEPTANCE)
    moved = ParticleSet(mu, lam, w, ps.weights.copy())
    return moved, accepted / max(sweeps, 1), (s_mu, s_lam, s_w)


@dataclass
class SmcStepInfo:
    t: int
    ess: float
    resampled: bool
    acceptance: tuple[float, float, float] | None
    summary: dict[str, float] = field(default_factory=dict)
    seconds: float = 0.0
    scales: tuple | None = field(default=None, repr=False)


def smc_step(
    ps: ParticleSet,
    y_seen: np.ndarray,
    y_new: np.ndarray,
    hyper: MixtureHyper,
    rng: np.random.Generator,
    *,
    ess_threshold: float = 0.5,
    move_count: int = 5,
    step: int = 0,
    scales=None,
) -> tuple[ParticleSet, SmcStepInfo]:
    """Reweight by the new batch's mixture likelihood, then resample and move if needed.

    ``y_seen`` is every observation so far including ``y_new``; the moves target
    the posterior given ``y_seen``.  ``scales`` carries tuned proposal scales
    between steps; the updated scales are stored on the returned info.
    """
    y_new = np.atleast_1d(np.asarray(y_new, dtype=float))
    with np.errstate(divide="ignore"):
        logw = np.log(ps.weights) + log_likelihood(y_new, ps.mu, ps.lam, ps.w)
    if not np.any(np.isfinite(logw)) or np.max(logw) == -np.inf:
        raise DegenerateWeightsError(step)
    wts = np.exp(logw - logsumexp(logw))
    wts /= wts.sum()
    cur = ParticleSet(ps.mu, ps.lam, ps.w, wts)
    e = ess(wts)
    acc = None
    resampled = e < ess_threshold * cur.N
    if resampled:
        cur = cur.select(resample(wts, rng))
        if move_count > 0:
            cur, a, scales = mh_move(cur, np.asarray(y_seen, dtype=float), hyper, rng, move_count, scales)
            acc = tuple(float(v) for v in a)
    return cur, SmcStepInfo(step, e, bool(resampled), acc, scales=scales)


@dataclass
class SmcReport:
    steps: list[SmcStepInfo]
    particles: ParticleSet

    @property
    def resample_count(self) -> int:
        return sum(s.resampled for s in self.steps)


def _summary(ps: ParticleSet) -> dict[str, float]:
    s, sd = sorted_means_sd(ps.posterior_means())
    out = {f"mean_{j + 1}": float(v) for j, v in enumerate(s)}
    out["sd"] = sd
    return out


def run_smc(
    y: Sequence[float],
    hyper: MixtureHyper,
    N: int,
    batch_sizes: Sequence[int],
    seed: int,
    *,
    ess_threshold: float = 0.5,
    move_count: int = 5,
) -> SmcReport:
    """Process ``y`` in the given batches starting from prior particles."""
    y = np.asarray(y, dtype=float)
    if sum(batch_sizes) > len(y):
        raise ConfigurationError(f"batches need {sum(batch_sizes)} observations, data has {len(y)}")
    rng = np.random.default_rng(seed)
    ps = prior_particles(N, hyper, rng)
    steps = []
    scales = None
    pos = 0
    for t, b in enumerate(batch_sizes, start=1):
        start = time.perf_counter()
        ps, info = smc_step(
            ps, y[: pos + b], y[pos : pos + b], hyper, rng,
            ess_threshold=ess_threshold, move_count=move_count, step=t, scales=scales,
        )
        scales = info.scales
        pos += b
        info.summary = _summary(ps)
        info.seconds = time.perf_counter() - start
        steps.append(info)
    return SmcReport(steps, ps)
