from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from tabench.models.base import FittedModel, ModelComplexity, check_binary, check_xy


class GaussianNBModel(FittedModel):
    """Gaussian naive Bayes for a binary target.

    Every class variance is inflated by ``var_smoothing`` times the largest
    feature variance of the training data.
    """

    family = "gnb"

    def __init__(self, var_smoothing: float = 1e-9):
        if not var_smoothing >= 0:
            raise ValueError("var_smoothing must be nonnegative")
        self.var_smoothing = float(var_smoothing)

    def _fit(self, X, y, deadline):
        X, y = check_xy(X, y)
        check_binary(y)
        self.epsilon_ = self.var_smoothing * float(np.var(X, axis=0).max())
        self.theta_ = np.empty((2, X.shape[1]))
        self.var_ = np.empty((2, X.shape[1]))
        self.log_prior_ = np.empty(2)
        for c in (0, 1):
            Xc = X[y == c]
            self.theta_[c] = Xc.mean(axis=0)
            self.var_[c] = Xc.var(axis=0) + self.epsilon_
            self.log_prior_[c] = np.log(Xc.shape[0] / X.shape[0])
        if np.any(self.var_ <= 0):
            # constant features within a class with no smoothing budget
            self.var_ = np.maximum(self.var_, np.finfo(float).tiny)

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = check_xy(X)
        out = np.empty((X.shape[0], 2))
        for c in (0, 1):
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_[c]))
            ll = ll - 0.5 * np.sum((X - self.theta_[c]) ** 2 / self.var_[c], axis=1)
            out[:, c] = self.log_prior_[c] + ll
        return out

    def predict_log_proba(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return jll - logsumexp(jll, axis=1, keepdims=True)

    def predict_proba(self, X) -> np.ndarray:
        return np.exp(self.predict_log_proba(X))

    def predict(self, X):
        jll = self.joint_log_likelihood(X)
        return (jll[:, 1] > jll[:, 0]).astype(float)

    def complexity(self):
        return ModelComplexity()

    def params(self):
        return {
            "var_smoothing": self.var_smoothing,
            "means": self.theta_.tolist(),
            "variances": self.var_.tolist(),
            "log_priors": self.log_prior_.tolist(),
        }


def gnb_fit(X, y, var_smoothing=1e-9, deadline=None) -> GaussianNBModel:
    return GaussianNBModel(var_smoothing).fit(X, y, deadline)
