from __future__ import annotations

import numpy as np

from tabench.models.base import FittedModel, ModelComplexity, check_xy
from tabench.numerics import squared_distances


class KNNModel(FittedModel):
    """Brute-force k-NN; distance ties resolve to the lowest training index."""

    def __init__(self, task: str = "classification", n_neighbors: int = 5):
        if task not in ("classification", "regression"):
            raise ValueError(f"unknown task {task!r}")
        if int(n_neighbors) < 1:
            raise ValueError("n_neighbors must be at least 1")
        self.task = task
        self.n_neighbors = int(n_neighbors)
        self.family = "knn_clf" if task == "classification" else "knn_regr"

    def _fit(self, X, y, deadline):
        X, y = check_xy(X, y)
        if self.n_neighbors > X.shape[0]:
            raise ValueError(f"n_neighbors={self.n_neighbors} exceeds {X.shape[0]} training rows")
        self.X_, self.y_ = X, y

    def neighbors(self, X) -> np.ndarray:
        d2 = squared_distances(self.X_, check_xy(X))
        return np.argsort(d2, axis=1, kind="stable")[:, : self.n_neighbors]

    def predict(self, X):
        labels = self.y_[self.neighbors(X)]
        if self.task == "regression":
            return labels.mean(axis=1)
        # majority vote; an even split goes to class 0
        return (labels.sum(axis=1) * 2 > self.n_neighbors).astype(float)

    def complexity(self):
        return ModelComplexity(stored_samples=int(self.X_.shape[0]))

    def params(self):
        return {"n_neighbors": self.n_neighbors, "stored_samples": int(self.X_.shape[0])}


def knn_predict(X_train, y_train, queries, k: int, task: str) -> np.ndarray:
    return KNNModel(task, k).fit(X_train, y_train).predict(queries)
