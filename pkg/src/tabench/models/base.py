from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

NONZERO_THRESHOLD = 1e-6


class BudgetExceeded(RuntimeError):
    """A learner ran past its wall-clock deadline."""


class Deadline:
    """Cooperative wall-clock budget checked from inside learner loops."""

    def __init__(self, seconds: float | None = None):
        self.seconds = seconds
        self.start = time.monotonic()
        self.at = None if seconds is None else self.start + seconds

    def check(self):
        if self.at is not None and time.monotonic() > self.at:
            raise BudgetExceeded(f"exceeded budget of {self.seconds:g} s")

    def elapsed(self) -> float:
        return time.monotonic() - self.start

    @property
    def expired(self) -> bool:
        return self.at is not None and time.monotonic() > self.at


NO_DEADLINE = Deadline(None)


@dataclass(frozen=True)
class ModelComplexity:
    nonzero_terms: int | None = None
    tree_nodes: int | None = None
    stored_samples: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def count_nonzero(coef, threshold: float = NONZERO_THRESHOLD) -> int:
    """Coefficients with magnitude below ``threshold`` count as zero."""
    return int(np.sum(np.abs(np.asarray(coef, dtype=float)) >= threshold))


def check_xy(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a nonempty 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values in X")
    if y is None:
        return X
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y have different numbers of rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite values in y")
    return X, y


def check_binary(y):
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("binary 0/1 target required")
    if y.min() == y.max():
        raise ValueError("target has a single class")


class FittedModel:
    """Common surface of every trained learner.

    Subclasses set ``family`` and implement ``_fit``, ``predict``,
    ``complexity`` and ``params``.
    """

    family = "base"

    fit_seconds: float = 0.0

    def fit(self, X, y, deadline: Deadline | None = None):
        start = time.monotonic()
        self._fit(X, y, deadline or NO_DEADLINE)
        self.fit_seconds = time.monotonic() - start
        return self

    def _fit(self, X, y, deadline: Deadline):
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError

    def complexity(self) -> ModelComplexity:
        return ModelComplexity()

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "fit_seconds": self.fit_seconds,
            "complexity": self.complexity().to_dict(),
            "params": self.params(),
        }


def model_complexity(model: FittedModel) -> ModelComplexity:
    return model.complexity()
