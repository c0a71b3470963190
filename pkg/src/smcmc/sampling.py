"""Vectorised variate generation from per-chain uniform streams.

The kernels batch many chains together but every chain must consume randomness
from its own generator only.  Calling a numpy distribution method once per chain
costs microseconds each in argument checking, so instead each chain draws one
block of uniforms and the transforms below turn the stacked blocks into normals
and gammas for all chains at once.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import ndtri

__all__ = [
    "stacked_uniforms",
    "normals_from_uniforms",
    "gamma_uniforms_needed",
    "gamma_from_uniforms",
    "GAMMA_CANDIDATES",
]

# proposals per gamma variate; Marsaglia-Tsang accepts each with probability > 0.95
GAMMA_CANDIDATES = 4
_HALF_ULP = 2.0 ** -54


def stacked_uniforms(rngs: Sequence[np.random.Generator], size: int) -> np.ndarray:
    """``(C, size)`` array whose row ``i`` comes from ``rngs[i]``, values in (0, 1)."""
    # random() returns multiples of 2**-53 in [0, 1); the shift keeps 0 out
    return np.stack([r.random(size) for r in rngs]) + _HALF_ULP


def normals_from_uniforms(u: np.ndarray) -> np.ndarray:
    return ndtri(u)


def gamma_uniforms_needed(m: int) -> int:
    """Uniforms per chain consumed by :func:`gamma_from_uniforms` for ``m`` shapes."""
    return m * (2 * GAMMA_CANDIDATES + 1)


def gamma_from_uniforms(shape: np.ndarray, u: np.ndarray, rngs: Sequence[np.random.Generator]) -> np.ndarray:
    """Standard gamma variates with the given ``(C, m)`` shapes.

    ``u`` holds ``gamma_uniforms_needed(m)`` uniforms per chain.  Marsaglia and
    Tsang's squeeze-free acceptance test is applied to ``GAMMA_CANDIDATES``
    proposals per variate; shapes below one are boosted by ``U**(1/a)``.  In the
    rare case that every proposal is rejected the variate is drawn from that
    chain's generator directly, so the output is always an exact gamma draw.
    """
    shape = np.asarray(shape, dtype=float)
    C, m = shape.shape
    R = GAMMA_CANDIDATES
    x = ndtri(u[:, : m * R]).reshape(C, m, R)
    acc_u = u[:, m * R : 2 * m * R].reshape(C, m, R)
    boost_u = u[:, 2 * m * R : 2 * m * R + m]

    small = shape < 1.0
    a = np.where(small, shape + 1.0, shape)
    d = (a - 1.0 / 3.0)[..., None]
    c = 1.0 / np.sqrt(9.0 * d)
    v = 1.0 + c * x
    with np.errstate(invalid="ignore", divide="ignore"):
        v3 = v * v * v
        ok = (v > 0) & (np.log(acc_u) < 0.5 * x * x + d - d * v3 + d * np.log(v3))
    first = np.argmax(ok, axis=2)
    found = np.take_along_axis(ok, first[..., None], axis=2)[..., 0]
    g = d[..., 0] * np.take_along_axis(v3, first[..., None], axis=2)[..., 0]

    if not found.all():
        for i, j in zip(*np.nonzero(~found)):
            g[i, j] = rngs[i].standard_gamma(a[i, j])
    with np.errstate(divide="ignore"):
        g = np.where(small, g * boost_u ** (1.0 / np.where(small, shape, 1.0)), g)
    return g
