"""Linear regression family: OLS, ridge (GLM slot), LASSO and polynomial LASSO."""
from __future__ import annotations

from itertools import combinations_with_replacement
from math import comb

import numpy as np
from numba import njit

from tabench.models.base import (
    NO_DEADLINE,
    Deadline,
    FittedModel,
    ModelComplexity,
    check_xy,
    count_nonzero,
)
from tabench.numerics import ols_fit

MAX_SWEEPS = 10_000
CD_TOL = 1e-8
MAX_POLY_WIDTH = 100_000


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lasso_objective(X, y, coef, intercept, alpha) -> float:
    r = y - X @ coef - intercept
    return float(r @ r / (2 * len(y)) + alpha * np.abs(coef).sum())


@njit(cache=True)
def _sweep_gram(coords, beta, grad, gram, col_sq, alpha):
    # grad holds X^T r / N and is kept current after every update
    max_change = 0.0
    for j in coords:
        if col_sq[j] == 0.0:
            continue
        old = beta[j]
        rho = grad[j] + col_sq[j] * old
        new = np.sign(rho) * max(abs(rho) - alpha, 0.0) / col_sq[j]
        delta = new - old
        if delta != 0.0:
            beta[j] = new
            for i in range(grad.size):
                grad[i] -= gram[j, i] * delta  # gram is symmetric; row access is contiguous
            max_change = max(max_change, abs(delta))
    return max_change


@njit(cache=True)
def _sweep_resid(coords, beta, resid, Xc, col_sq, alpha):
    n = resid.size
    max_change = 0.0
    for j in coords:
        if col_sq[j] == 0.0:
            continue
        old = beta[j]
        dot = 0.0
        for i in range(n):
            dot += Xc[i, j] * resid[i]
        rho = dot / n + col_sq[j] * old
        new = np.sign(rho) * max(abs(rho) - alpha, 0.0) / col_sq[j]
        delta = new - old
        if delta != 0.0:
            beta[j] = new
            for i in range(n):
                resid[i] -= Xc[i, j] * delta
            max_change = max(max_change, abs(delta))
    return max_change


def lasso_coordinate_descent(X, y, alpha, tol=CD_TOL, max_sweeps=MAX_SWEEPS,
                             deadline: Deadline = NO_DEADLINE, history=None):
    """Minimize (1/2N)||y - Xb - c||^2 + alpha*||b||_1 with c unpenalized.

    Cyclic coordinate descent with an active-set inner loop: after a full
    sweep only nonzero coordinates are updated until they settle, then a
    full sweep confirms convergence (largest coefficient change < ``tol``).
    ``history``, if a list, receives the objective after every sweep.
    Returns ``(coef, intercept, n_sweeps)``.
    """
    n, p = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = np.asfortranarray(X - x_mean)
    yc = y - y_mean
    col_sq = np.einsum("ij,ij->j", Xc, Xc) / n
    beta = np.zeros(p)
    use_gram = n > p
    if use_gram:
        gram = Xc.T @ Xc / n
        grad = Xc.T @ yc / n  # X^T r / N for the current residual
    else:
        resid = yc.copy()

    def sweep(coords) -> float:
        if use_gram:
            return _sweep_gram(coords, beta, grad, gram, col_sq, alpha)
        return _sweep_resid(coords, beta, resid, Xc, col_sq, alpha)

    def record():
        if history is not None:
            history.append(lasso_objective(Xc, yc, beta, 0.0, alpha))

    everything = np.arange(p)
    sweeps = 0
    while sweeps < max_sweeps:
        deadline.check()
        change = sweep(everything)
        sweeps += 1
        record()
        if change < tol:
            break
        while sweeps < max_sweeps:
            active = np.flatnonzero(beta)
            if active.size == 0:
                break
            deadline.check()
            change = sweep(active)
            sweeps += 1
            record()
            if change < tol:
                break
    return beta, float(y_mean - x_mean @ beta), sweeps


def ridge_solve(X, y, alpha):
    """Minimize (1/2N)||y - Xb - c||^2 + (alpha/2)||b||^2 with c unpenalized."""
    if alpha == 0:
        fit = ols_fit(X, y)
        return fit.coefficients, fit.intercept
    n, p = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    A = Xc.T @ Xc / n + alpha * np.eye(p)
    coef = np.linalg.solve(A, Xc.T @ (y - y_mean) / n)
    return coef, float(y_mean - x_mean @ coef)


class LinearModel(FittedModel):
    """Least squares with an optional l1 or l2 penalty on the slopes."""

    family = "linear"

    def __init__(self, penalty: str = "none", alpha: float = 0.0):
        if penalty not in ("none", "l1", "l2"):
            raise ValueError(f"unknown penalty {penalty!r}")
        if not np.isfinite(alpha) or alpha < 0:
            raise ValueError("alpha must be a finite nonnegative number")
        self.penalty = penalty
        self.alpha = float(alpha)
        self.family = {"none": "linear", "l1": "lasso", "l2": "glm_ridge"}[penalty]
        self.n_sweeps = 0

    def _fit(self, X, y, deadline):
        X, y = check_xy(X, y)
        if self.penalty == "none":
            fit = ols_fit(X, y)
            self.coef_, self.intercept_ = fit.coefficients, fit.intercept
        elif self.penalty == "l2":
            self.coef_, self.intercept_ = ridge_solve(X, y, self.alpha)
        else:
            self.coef_, self.intercept_, self.n_sweeps = lasso_coordinate_descent(
                X, y, self.alpha, deadline=deadline
            )

    def predict(self, X):
        return check_xy(X) @ self.coef_ + self.intercept_

    def complexity(self):
        return ModelComplexity(nonzero_terms=count_nonzero(self.coef_))

    def params(self):
        return {
            "penalty": self.penalty,
            "alpha": self.alpha,
            "coefficients": self.coef_.tolist(),
            "intercept": self.intercept_,
        }


def linear_family_fit(X, y, penalty: str = "none", alpha: float = 0.0, deadline=None) -> LinearModel:
    return LinearModel(penalty, alpha).fit(X, y, deadline)


def polynomial_terms(d: int, degree: int) -> list[tuple[int, ...]]:
    """Monomials of total degree 1..degree in graded lexicographic order."""
    return [t for k in range(1, degree + 1) for t in combinations_with_replacement(range(d), k)]


def polynomial_width(d: int, degree: int) -> int:
    return comb(d + degree, degree) - 1


def expand_polynomial(X, degree: int) -> np.ndarray:
    """All monomials of the inputs up to ``degree`` (no bias column)."""
    if degree not in (2, 3):
        raise ValueError("degree must be 2 or 3")
    X = check_xy(X)
    width = polynomial_width(X.shape[1], degree)
    if width > MAX_POLY_WIDTH:
        raise ValueError(f"polynomial expansion too wide ({width} columns)")
    out = np.empty((X.shape[0], width))
    for col, term in enumerate(polynomial_terms(X.shape[1], degree)):
        out[:, col] = np.prod(X[:, term], axis=1)
    return out


class PolyLassoModel(FittedModel):
    """LASSO on a polynomial expansion.

    Expanded columns are standardized before coordinate descent and the
    coefficients are mapped back to the raw monomial scale.
    """

    family = "poly_lasso"

    def __init__(self, degree: int = 2, alpha: float = 1.0):
        if degree not in (2, 3):
            raise ValueError("degree must be 2 or 3")
        if not np.isfinite(alpha) or alpha < 0:
            raise ValueError("alpha must be a finite nonnegative number")
        self.degree = int(degree)
        self.alpha = float(alpha)

    def _fit(self, X, y, deadline):
        X, y = check_xy(X, y)
        Z = expand_polynomial(X, self.degree)
        mean = Z.mean(axis=0)
        std = Z.std(axis=0)
        safe = np.where(std > 0, std, 1.0)
        coef, _, self.n_sweeps = lasso_coordinate_descent((Z - mean) / safe, y, self.alpha,
                                                          deadline=deadline)
        coef = np.where(std > 0, coef / safe, 0.0)
        self.n_inputs_ = X.shape[1]
        self.coef_ = coef
        self.intercept_ = float(y.mean() - mean @ coef)

    def predict(self, X):
        return expand_polynomial(X, self.degree) @ self.coef_ + self.intercept_

    def complexity(self):
        return ModelComplexity(nonzero_terms=count_nonzero(self.coef_))

    def params(self):
        return {
            "degree": self.degree,
            "alpha": self.alpha,
            "terms": [list(t) for t in polynomial_terms(self.n_inputs_, self.degree)],
            "coefficients": self.coef_.tolist(),
            "intercept": self.intercept_,
        }
