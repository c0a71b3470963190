"""Autocorrelation estimators used to pick the number of sweeps per data step.

Two estimators are provided:

* :func:`cross_chain_acf` correlates the ensemble at the current sweep with the
  ensemble right after the jump, *across* the ``L`` independent chains.  This is
  what the engine uses for its stopping rule.
* :func:`single_chain_acf` is the classical within-chain lag-``k`` estimator over a
  window of sweeps.  It is kept for comparison: on multimodal targets a single
  chain that sits in one mode decorrelates quickly *within* that mode and so
  understates the true decorrelation time.

Undefined correlations (zero spread in every component) are returned as ``None``
and never silently mapped to 0 or 1; callers decide what that means.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "cross_chain_acf",
    "component_correlations",
    "single_chain_acf",
    "select_epsilon",
    "epsilon_error_sum",
    "EPSILON_GRID_STEP",
]

EPSILON_GRID_STEP = 1e-6
_GRID_DIV = 1_000_000
_REL_VAR_FLOOR = 1e-24


def _as_snapshot(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"snapshot must be an L x p matrix, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError("snapshot needs at least 2 chains")
    if arr.shape[1] < 1:
        raise ValueError("snapshot needs at least 1 component")
    if not np.all(np.isfinite(arr)):
        raise ValueError("snapshot contains non-finite entries")
    return arr


def _degenerate(centered: np.ndarray, ss: np.ndarray, raw: np.ndarray) -> np.ndarray:
    # a column is constant if its spread is negligible next to its magnitude
    scale = np.maximum(1.0, np.max(np.abs(raw), axis=0)) ** 2
    return ss <= _REL_VAR_FLOOR * scale * raw.shape[0]


def component_correlations(base, current) -> np.ndarray:
    """Per-component Pearson correlation across chains; NaN where undefined."""
    b = _as_snapshot(base)
    c = _as_snapshot(current)
    if b.shape != c.shape:
        raise ValueError(f"snapshot shapes differ: {b.shape} vs {c.shape}")
    bc = b - b.mean(axis=0)
    cc = c - c.mean(axis=0)
    ssb = np.einsum("lj,lj->j", bc, bc)
    ssc = np.einsum("lj,lj->j", cc, cc)
    num = np.einsum("lj,lj->j", cc, bc)
    bad = _degenerate(bc, ssb, b) | _degenerate(cc, ssc, c)
    out = np.full(b.shape[1], np.nan)
    ok = ~bad
    out[ok] = np.clip(num[ok] / np.sqrt(ssb[ok] * ssc[ok]), -1.0, 1.0)
    return out


def cross_chain_acf(base, current) -> float | None:
    """Maximum over components of the across-chain correlation.

    Parameters
    ----------
    base, current : array_like, shape (L, p)
        Diagnostic components of every chain at the reference sweep (right after
        the jump) and at the current sweep.  Row ``l`` belongs to chain ``l``.

    Returns
    -------
    float or None
        ``max_j corr_l(current[:, j], base[:, j])``.  Components with zero spread
        in either snapshot are skipped; ``None`` if every component is skipped.

    Notes
    -----
    The sample covariance and the two sample variances are all unnormalised sums,
    so the ``1/L`` versus ``1/(L-1)`` convention cancels.
    """
    r = component_correlations(base, current)
    if np.all(np.isnan(r)):
        return None
    return float(np.nanmax(r))


def single_chain_acf(trace, lag: int, window: tuple[int, int]) -> float | None:
    """Within-chain lag-``lag`` autocorrelation over sweeps ``s1..s2`` (inclusive).

    ``trace`` has shape (S,) or (S, p), indexed by sweep.  The sum runs over
    ``s = s1..s2`` pairing ``X[s]`` with ``X[s - lag]``, both centred at the window
    mean of ``X[s1..s2]``; the maximum over components is returned.
    """
    x = np.asarray(trace, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    s1, s2 = window
    if lag < 0:
        raise ValueError("lag must be non-negative")
    if s2 - s1 < lag + 1:
        raise ValueError(f"window ({s1}, {s2}) too short for lag {lag}")
    if s1 - lag < 0 or s2 >= x.shape[0]:
        raise ValueError(f"window ({s1}, {s2}) with lag {lag} exceeds trace of length {x.shape[0]}")
    seg = x[s1 : s2 + 1]
    lagged = x[s1 - lag : s2 + 1 - lag]
    mean = seg.mean(axis=0)
    dev = seg - mean
    den = np.einsum("sj,sj->j", dev, dev)
    num = np.einsum("sj,sj->j", dev, lagged - mean)
    ok = ~_degenerate(dev, den, seg)
    if not ok.any():
        return None
    return float(np.max(num[ok] / den[ok]))


def epsilon_error_sum(eps: float, n: int) -> float:
    """``sum_{t=1..n} eps**(n+1-t) / sqrt(t)``, the accumulated error bound."""
    t = np.arange(1, n + 1, dtype=float)
    with np.errstate(under="ignore"):
        terms = np.power(float(eps), n + 1 - t) / np.sqrt(t)
    return float(terms.sum())


def select_epsilon(n: int, eps_T: float) -> tuple[float, bool]:
    """Largest ``eps`` on a 1e-6 grid with ``epsilon_error_sum(eps, n) <= eps_T``.

    Returns ``(eps, saturated)``.  ``saturated`` is True when even the smallest
    grid value violates the tolerance; that smallest value is returned.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not eps_T > 0:
        raise ValueError("eps_T must be positive")
    lo, hi = 1, _GRID_DIV - 1
    if epsilon_error_sum(lo / _GRID_DIV, n) > eps_T:
        return lo / _GRID_DIV, True
    if epsilon_error_sum(hi / _GRID_DIV, n) <= eps_T:
        return hi / _GRID_DIV, False
    # invariant: lo feasible, hi infeasible
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if epsilon_error_sum(mid / _GRID_DIV, n) <= eps_T:
            lo = mid
        else:
            hi = mid
    return lo / _GRID_DIV, False
