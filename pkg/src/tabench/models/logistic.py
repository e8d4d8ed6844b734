from __future__ import annotations

import numpy as np
from scipy.special import expit

from tabench.models.base import FittedModel, ModelComplexity, check_binary, check_xy, count_nonzero

MAX_ITER = 10_000
GRAD_TOL = 1e-6


def logistic_loss_grad(w, X, y, C=None):
    """Mean log-loss plus ||beta||^2 / (2 C N); ``w`` is (beta..., intercept).

    ``C=None`` means no penalty.
    """
    n = X.shape[0]
    beta, b = w[:-1], w[-1]
    z = X @ beta + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z)
    err = expit(z) - y
    grad = np.empty_like(w)
    grad[:-1] = X.T @ err / n
    grad[-1] = err.mean()
    if C is not None:
        loss += beta @ beta / (2.0 * C * n)
        grad[:-1] += beta / (C * n)
    return float(loss), grad


def gradient_descent(fun, w0, max_iter=MAX_ITER, tol=GRAD_TOL, deadline=None):
    """Gradient descent with Armijo backtracking; the step grows after each success."""
    w = np.array(w0, dtype=float)
    f, g = fun(w)
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        gnorm2 = g @ g
        if np.sqrt(gnorm2) < tol:
            break
        if deadline is not None and it % 50 == 0:
            deadline.check()
        while True:
            w_new = w - step * g
            f_new, g_new = fun(w_new)
            if f_new <= f - 0.5 * step * gnorm2 or step < 1e-16:
                break
            step *= 0.5
        w, f, g = w_new, f_new, g_new
        step *= 2.0
    return w, it


class LogisticModel(FittedModel):
    family = "logistic"

    def __init__(self, penalty: str | None = "l2", C: float = 1.0):
        penalty = "none" if penalty in (None, "None") else penalty
        if penalty not in ("l2", "none"):
            raise ValueError(f"unknown penalty {penalty!r}")
        if penalty == "l2" and not C > 0:
            raise ValueError("C must be positive")
        self.penalty = penalty
        self.C = float(C)

    def _fit(self, X, y, deadline):
        X, y = check_xy(X, y)
        check_binary(y)
        C = self.C if self.penalty == "l2" else None
        w, self.n_iter_ = gradient_descent(
            lambda w: logistic_loss_grad(w, X, y, C), np.zeros(X.shape[1] + 1), deadline=deadline
        )
        self.coef_, self.intercept_ = w[:-1], float(w[-1])

    def predict_proba(self, X):
        return expit(check_xy(X) @ self.coef_ + self.intercept_)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(float)

    def complexity(self):
        return ModelComplexity(nonzero_terms=count_nonzero(self.coef_))

    def params(self):
        return {"penalty": self.penalty, "C": self.C, "coefficients": self.coef_.tolist(),
                "intercept": self.intercept_}


def logistic_fit(X, y, penalty="l2", C=1.0, deadline=None) -> LogisticModel:
    return LogisticModel(penalty, C).fit(X, y, deadline)
