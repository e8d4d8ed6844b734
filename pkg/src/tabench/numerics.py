"""Numerical kernels shared by the complexity metrics and the learners."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class LinearFit:
    coefficients: np.ndarray
    intercept: float
    residual_mean_abs: float

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coefficients + self.intercept


@dataclass(frozen=True)
class NeighborResult:
    indices: np.ndarray
    distances: np.ndarray


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return X


def ols_fit(X, y) -> LinearFit:
    """Least squares with an unpenalized intercept.

    Columns are centred first, so the minimum-norm solution on
    rank-deficient inputs applies to the slopes only.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X and y must have the same nonzero number of rows")
    _check_finite(X, y)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    if X.shape[1]:
        coef, *_ = np.linalg.lstsq(Xc, y - y_mean, rcond=None)
    else:
        coef = np.zeros(0)
    intercept = float(y_mean - x_mean @ coef)
    resid = y - (X @ coef + intercept)
    return LinearFit(coef, intercept, float(np.mean(np.abs(resid))))


def pca_components_for_variance(X, threshold: float = 0.95) -> int:
    """Smallest number of principal components reaching ``threshold`` of the variance."""
    X = _as_matrix(X)
    if X.shape[0] < 2:
        raise ValueError("need at least two rows")
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    _check_finite(X)
    if X.shape[1] == 0:
        return 0
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    eig = np.clip(np.linalg.eigvalsh(cov)[::-1], 0.0, None)
    total = eig.sum()
    if total <= 0:
        return 0
    # drop numerical noise from a rank-deficient spectrum
    eig = np.where(eig > total * 1e-12, eig, 0.0)
    ratio = np.cumsum(eig) / eig.sum()
    return int(np.searchsorted(ratio, threshold - 1e-12, side="left") + 1)


def squared_distances(points, queries=None) -> np.ndarray:
    """Exact pairwise squared Euclidean distances (no Gram-matrix shortcut).

    Summing squared coordinate differences keeps equal distances bit-equal,
    which the lowest-index tie rule relies on.
    """
    P = _as_matrix(points)
    Q = P if queries is None else _as_matrix(queries)
    out = np.empty((Q.shape[0], P.shape[0]))
    step = max(1, 2_000_000 // max(1, P.shape[0] * max(P.shape[1], 1)))
    for start in range(0, Q.shape[0], step):
        diff = Q[start:start + step, None, :] - P[None, :, :]
        out[start:start + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def knn_query(points, i: int, k: int, exclude_self: bool = True) -> NeighborResult:
    """k nearest neighbours of row ``i``; ties go to the lowest index."""
    P = _as_matrix(points)
    n = P.shape[0]
    limit = n - 1 if exclude_self else n
    if not 1 <= k <= limit:
        raise ValueError(f"k={k} out of range 1..{limit}")
    d2 = squared_distances(P, P[i:i + 1])[0]
    order = np.argsort(d2, kind="stable")
    if exclude_self:
        order = order[order != i]
    idx = order[:k]
    return NeighborResult(idx, np.sqrt(d2[idx]))


def knn_all(points, k: int) -> np.ndarray:
    """Leave-one-out neighbour table: row i lists the k nearest others of i."""
    P = _as_matrix(points)
    n = P.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} out of range 1..{n - 1}")
    d2 = squared_distances(P)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :k]


def spearman_rho(x, y) -> float:
    """Pearson correlation of average ranks; 0 when either input is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("length mismatch")
    if x.size < 2:
        raise ValueError("need at least two observations")
    rx = rankdata(x) - (x.size + 1) / 2.0
    ry = rankdata(y) - (y.size + 1) / 2.0
    sxx = rx @ rx
    syy = ry @ ry
    if sxx == 0 or syy == 0:
        return 0.0
    return float(np.clip((rx @ ry) / np.sqrt(sxx * syy), -1.0, 1.0))
