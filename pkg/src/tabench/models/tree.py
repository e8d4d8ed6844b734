"""Greedy CART trees for binary classification and regression."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tabench.models.base import FittedModel, ModelComplexity, check_xy

MAX_DEPTH_LIMIT = 6
# gains within this fraction of the parent's total impurity count as ties
TIE_RTOL = 1e-9


@dataclass
class Node:
    value: float
    n_samples: int
    impurity: float
    feature: int | None = None
    threshold: float | None = None
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def count(self) -> int:
        if self.is_leaf:
            return 1
        return 1 + self.left.count() + self.right.count()

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        out = {"value": self.value, "n_samples": self.n_samples, "impurity": self.impurity}
        if not self.is_leaf:
            out.update(feature=self.feature, threshold=self.threshold,
                       left=self.left.to_dict(), right=self.right.to_dict())
        return out


def gini(pos, n):
    p = pos / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def entropy(pos, n):
    p = np.asarray(pos / n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return np.where((p == 0) | (p == 1), 0.0, h)


def mse(s1, s2, n):
    return np.maximum(s2 / n - (s1 / n) ** 2, 0.0)


class _Stats:
    """Sufficient statistics for impurity: label sums (and squares for mse)."""

    def __init__(self, criterion: str):
        self.criterion = criterion

    def node_impurity(self, y) -> float:
        n = y.size
        if self.criterion == "mse":
            return float(mse(y.sum(), (y * y).sum(), n))
        fn = gini if self.criterion == "gini" else entropy
        return float(fn(y.sum(), n))

    def child_impurities(self, y_sorted, cut):
        """Impurities of left/right children for each cut position (left size)."""
        n = y_sorted.size
        n_left = cut.astype(float)
        n_right = n - n_left
        c1 = np.cumsum(y_sorted)[cut - 1]
        t1 = y_sorted.sum()
        if self.criterion == "mse":
            c2 = np.cumsum(y_sorted * y_sorted)[cut - 1]
            t2 = (y_sorted * y_sorted).sum()
            return mse(c1, c2, n_left), mse(t1 - c1, t2 - c2, n_right)
        fn = gini if self.criterion == "gini" else entropy
        return fn(c1, n_left), fn(t1 - c1, n_right)


def best_split(X, y, stats: _Stats, min_leaf: int):
    """Exhaustive search over features and midpoints of consecutive distinct values.

    Returns ``(gain, feature, threshold)`` with gain in total (count-weighted)
    impurity, or ``None`` when no admissible split exists. Ties go to the
    lowest feature index, then the smallest threshold.
    """
    n = y.size
    parent = stats.node_impurity(y) * n
    tol = TIE_RTOL * parent
    best = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        cut = np.flatnonzero(xs[1:] > xs[:-1]) + 1
        cut = cut[(cut >= min_leaf) & (n - cut >= min_leaf)]
        if cut.size == 0:
            continue
        left, right = stats.child_impurities(ys, cut)
        gains = parent - cut * left - (n - cut) * right
        k = int(np.argmax(gains))
        # argmax takes the first maximum, but near-equal gains also count as ties
        k = int(np.flatnonzero(gains >= gains[k] - tol)[0])
        if best is None or gains[k] > best[0] + tol:
            threshold = (xs[cut[k] - 1] + xs[cut[k]]) / 2.0
            best = (float(gains[k]), j, float(threshold))
    return best


class DecisionTreeModel(FittedModel):
    def __init__(self, task: str = "classification", criterion: str | None = None,
                 max_depth: int = MAX_DEPTH_LIMIT, min_samples_leaf=1):
        if task not in ("classification", "regression"):
            raise ValueError(f"unknown task {task!r}")
        criterion = criterion or ("gini" if task == "classification" else "mse")
        allowed = ("gini", "entropy") if task == "classification" else ("mse",)
        if criterion not in allowed:
            raise ValueError(f"criterion {criterion!r} not valid for {task}")
        if not 1 <= int(max_depth) <= MAX_DEPTH_LIMIT:
            raise ValueError(f"max_depth must lie in 1..{MAX_DEPTH_LIMIT}")
        if min_samples_leaf <= 0:
            raise ValueError("min_samples_leaf must be positive")
        self.task = task
        self.criterion = criterion
        self.max_depth = int(max_depth)
        self.min_samples_leaf = min_samples_leaf
        self.family = "tree_clf" if task == "classification" else "tree_regr"

    def _min_leaf(self, n: int) -> int:
        """Fractions below 1 are a share of the training set, rounded up."""
        m = self.min_samples_leaf
        if isinstance(m, float) and m < 1:
            return max(1, math.ceil(m * n))
        return int(m)

    def _leaf_value(self, y) -> float:
        if self.task == "regression":
            return float(y.mean())
        pos = y.sum()
        return 1.0 if pos > y.size - pos else 0.0

    def _grow(self, X, y, depth, deadline) -> Node:
        deadline.check()
        imp = self.stats.node_impurity(y)
        node = Node(self._leaf_value(y), int(y.size), imp)
        if depth >= self.max_depth or imp <= 0.0 or y.size < 2 * self.min_leaf_:
            return node
        split = best_split(X, y, self.stats, self.min_leaf_)
        if split is None or split[0] <= TIE_RTOL * imp * y.size:
            return node
        _, j, thr = split
        mask = X[:, j] <= thr
        node.feature, node.threshold = j, thr
        node.left = self._grow(X[mask], y[mask], depth + 1, deadline)
        node.right = self._grow(X[~mask], y[~mask], depth + 1, deadline)
        return node

    def _fit(self, X, y, deadline):
        X, y = check_xy(X, y)
        if self.task == "classification":
            if not np.all((y == 0) | (y == 1)):
                raise ValueError("binary 0/1 target required")
        self.stats = _Stats(self.criterion)
        self.min_leaf_ = self._min_leaf(X.shape[0])
        self.root_ = self._grow(X, y, 0, deadline)

    def predict(self, X):
        X = check_xy(X)
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            node = self.root_
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.value
        return out

    def complexity(self):
        return ModelComplexity(tree_nodes=self.root_.count())

    def params(self):
        return {
            "criterion": self.criterion,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "tree": self.root_.to_dict(),
        }


def tree_fit(X, y, task, criterion=None, max_depth=MAX_DEPTH_LIMIT, min_samples_leaf=1,
             deadline=None) -> DecisionTreeModel:
    return DecisionTreeModel(task, criterion, max_depth, min_samples_leaf).fit(X, y, deadline)
