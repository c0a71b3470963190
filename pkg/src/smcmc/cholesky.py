"""Row-append Cholesky factors of squared-exponential correlation matrices.

For every inverse bandwidth ``a_h`` on a grid the cache keeps, for the design
``X_t`` seen so far,

* ``L_h``     lower-triangular with ``L_h L_h^T = C_h(X_t, X_t) + jitter * I``
* ``Linv_h``  its inverse
* ``Q_h``     ``Linv_h^T Linv_h``, the inverse correlation matrix
* ``logdet_h`` ``log det (C_h + jitter * I)``

Appending a point ``x`` with correlations ``c = C_h(X_t, x)`` uses::

    v   = Linv c = L \\ c         (new off-diagonal row of L)
    d   = sqrt(1 + jitter - v.v)  (new diagonal of L)
    g   = 1 / d                   (new diagonal of Linv)
    E   = -g v^T Linv = -g L^T \\ v (new off-diagonal row of Linv)
    Q  <- [[Q + E^T E, g E^T], [g E, g^2]]

which costs O(t^2) per grid point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dtrtrs

log = logging.getLogger(__name__)

__all__ = ["CholeskyCache", "FreshCholeskyCache", "AppendTerms", "correlation", "fresh_factor", "D2_FLOOR"]

D2_FLOOR = 1e-10


def correlation(A: np.ndarray, B: np.ndarray, a: np.ndarray) -> np.ndarray:
    """``exp(-a_h^2 |A_i - B_j|^2)`` for every grid value -> (H, len(A), len(B))."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    return np.exp(-(a ** 2)[:, None, None] * sq[None])


def fresh_factor(X: np.ndarray, a: float, jitter: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Direct Cholesky factor and inverse of ``C_a(X, X) + jitter * I``."""
    K = correlation(X, X, a)[0] + jitter * np.eye(len(X))
    Lf = np.linalg.cholesky(K)
    return Lf, solve_triangular(Lf, np.eye(len(X)), lower=True)


@dataclass
class AppendTerms:
    """The pieces of one row append for one grid point."""

    B: np.ndarray
    d: float
    g: float
    E: np.ndarray


class CholeskyCache:
    """Incrementally maintained factors for every grid value.

    Parameters
    ----------
    grid : array_like, shape (H,)
        Inverse bandwidths.
    dim : int
        Covariate dimension.
    jitter : float
        Added to the diagonal of every correlation matrix.
    capacity : int
        Initial storage; grows by doubling.
    """

    def __init__(self, grid, dim: int, jitter: float = 1e-8, capacity: int = 64):
        self.grid = np.asarray(grid, dtype=float)
        if self.grid.ndim != 1 or len(self.grid) < 1 or np.any(self.grid <= 0):
            raise ValueError("grid must be a non-empty vector of positive values")
        self.dim = int(dim)
        self.jitter = float(jitter)
        self.t = 0
        self.logdet = np.zeros(len(self.grid))
        self.flags: list[tuple[int, int]] = []
        self.last: list[AppendTerms] = []
        self._alloc(max(int(capacity), 1))

    @property
    def H(self) -> int:
        return len(self.grid)

    def _alloc(self, cap: int):
        H = len(self.grid)
        old = getattr(self, "_L", None)
        self._X = np.zeros((cap, self.dim)) if old is None else np.vstack([self._X, np.zeros((cap - len(self._X), self.dim))])
        new = []
        for name in ("_L", "_Linv", "_Q"):
            arr = np.zeros((H, cap, cap))
            if old is not None:
                t = self.t
                arr[:, :t, :t] = getattr(self, name)[:, :t, :t]
            new.append(arr)
        self._L, self._Linv, self._Q = new

    # views over the live part of the storage
    @property
    def X(self) -> np.ndarray:
        return self._X[: self.t]

    @property
    def L(self) -> np.ndarray:
        return self._L[:, : self.t, : self.t]

    @property
    def Linv(self) -> np.ndarray:
        return self._Linv[:, : self.t, : self.t]

    @property
    def Q(self) -> np.ndarray:
        return self._Q[:, : self.t, : self.t]

    def cross(self, x) -> np.ndarray:
        """Correlations between the design and new points -> (H, t, m)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return correlation(self.X, x, self.grid)

    def append(self, x) -> "CholeskyCache":
        """Add one covariate vector; updates every grid value in place."""
        x = np.asarray(x, dtype=float).reshape(self.dim)
        t = self.t
        if t + 1 > len(self._X):
            self._alloc(2 * len(self._X))
        terms = []
        if t == 0:
            for h in range(self.H):
                d2 = self._floor(1.0 + self.jitter, h)
                terms.append(AppendTerms(np.zeros(0), np.sqrt(d2), 1.0 / np.sqrt(d2), np.zeros(0)))
        else:
            c = self.cross(x)[:, :, 0]
            for h in range(self.H):
                # substitution rather than products with Linv: same O(t^2) cost,
                # noticeably smaller rounding error at small bandwidths.  LAPACK is
                # called directly to keep the per-grid-point overhead small.
                Lh = np.asfortranarray(self._L[h, :t, :t])
                v = dtrtrs(Lh, c[h], lower=1, trans=0)[0]
                d2 = self._floor(1.0 + self.jitter - float(v @ v), h)
                d = np.sqrt(d2)
                g = 1.0 / d
                E = -g * dtrtrs(Lh, v, lower=1, trans=1)[0]
                terms.append(AppendTerms(v, d, g, E))
        self._write_all(terms)
        for h, tm in enumerate(terms):
            self.logdet[h] += 2.0 * np.log(tm.d)
        self._X[t] = x
        self.t = t + 1
        self.last = terms
        return self

    def _floor(self, d2: float, h: int) -> float:
        if d2 <= D2_FLOOR:
            log.warning("ill-conditioned append at t=%d, grid index %d (d^2=%.3g)", self.t + 1, h, d2)
            self.flags.append((self.t + 1, h))
            return D2_FLOOR
        return d2

    def _write_all(self, terms: list[AppendTerms]):
        t = self.t
        d = np.array([tm.d for tm in terms])
        g = np.array([tm.g for tm in terms])
        self._L[:, t, t] = d
        self._Linv[:, t, t] = g
        self._Q[:, t, t] = g * g
        if t:
            B = np.stack([tm.B for tm in terms])
            E = np.stack([tm.E for tm in terms])
            self._L[:, t, :t] = B
            self._Linv[:, t, :t] = E
            self._Q[:, :t, :t] += E[:, :, None] * E[:, None, :]
            self._Q[:, t, :t] = g[:, None] * E
            self._Q[:, :t, t] = g[:, None] * E

    def extend(self, X) -> "CholeskyCache":
        for x in np.atleast_2d(X):
            self.append(x)
        return self


class FreshCholeskyCache(CholeskyCache):
    """Same interface, but every append refactorises from scratch.

    Used as the reference when checking the incremental formulas; costs O(t^3)
    per append.
    """

    def append(self, x) -> "FreshCholeskyCache":
        x = np.asarray(x, dtype=float).reshape(self.dim)
        t = self.t
        if t + 1 > len(self._X):
            self._alloc(2 * len(self._X))
        self._X[t] = x
        self.t = t + 1
        X = self.X
        terms = []
        for h, a in enumerate(self.grid):
            Lf, Li = fresh_factor(X, a, self.jitter)
            self._L[h, : t + 1, : t + 1] = Lf
            self._Linv[h, : t + 1, : t + 1] = Li
            self._Q[h, : t + 1, : t + 1] = Li.T @ Li
            self.logdet[h] = 2.0 * np.log(np.diag(Lf)).sum()
            terms.append(AppendTerms(Lf[t, :t].copy(), Lf[t, t], Li[t, t], Li[t, :t].copy()))
        self.last = terms
        return self
