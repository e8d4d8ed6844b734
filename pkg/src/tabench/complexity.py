"""Dataset complexity descriptors used to stratify benchmark results.

Metric functions take a feature matrix and a target vector so they can be
evaluated on any array; :func:`profile` runs the suite on a :class:`Dataset`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from tabench.numerics import (
    _as_matrix,
    knn_all,
    ols_fit,
    pca_components_for_variance,
    spearman_rho,
)

PCA_VARIANCE = 0.95
E5_NEIGHBORS = 5

COMMON_METRICS = ("n_samples", "n_features", "t2", "t3")
CLASSIFICATION_METRICS = COMMON_METRICS + ("fisher_f1", "n3", "e5", "c1_class")
REGRESSION_METRICS = COMMON_METRICS + ("c1_reg", "l1", "s3")


@dataclass(frozen=True)
class ComplexityProfile:
    task: str
    n_samples: int
    n_features: int
    t2: float
    t3: float
    fisher_f1: float | None = None
    n3: float | None = None
    e5: float | None = None
    c1_class: float | None = None
    c1_reg: float | None = None
    l1: float | None = None
    s3: float | None = None
    pca_input: str = "preprocessed"
    name: str = ""

    def __post_init__(self):
        if self.t3 > self.t2 + 1e-15:
            raise ValueError("t3 cannot exceed t2")

    def metric_names(self) -> tuple[str, ...]:
        return CLASSIFICATION_METRICS if self.task == "classification" else REGRESSION_METRICS

    def get(self, metric: str) -> float:
        value = getattr(self, metric)
        if value is None:
            raise KeyError(f"{metric} is not defined for {self.task} datasets")
        return float(value)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "ComplexityProfile":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def size_sparsity_metrics(X) -> tuple[int, int, float, float]:
    X = _as_matrix(X)
    n, d = X.shape
    d_pca = pca_components_for_variance(X, PCA_VARIANCE)
    return n, d, d / n, d_pca / n


def fisher_f1(X, y) -> float:
    """1 / (1 + max_j r_j) with the p_c-weighted Fisher ratio per feature."""
    X = _as_matrix(X)
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("Fisher ratio needs at least two classes")
    mu = X.mean(axis=0)
    between = np.zeros(X.shape[1])
    within = np.zeros(X.shape[1])
    for c in classes:
        Xc = X[y == c]
        p = Xc.shape[0] / X.shape[0]
        between += p * (Xc.mean(axis=0) - mu) ** 2
        within += p * Xc.var(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(within > 0, between / within, np.where(between > 0, np.inf, 0.0))
    best = ratio.max() if ratio.size else 0.0
    return 0.0 if np.isinf(best) else float(1.0 / (1.0 + best))


def n3(X, y) -> float:
    """Leave-one-out 1-NN error rate."""
    y = np.asarray(y)
    nn = knn_all(X, 1)[:, 0]
    return float(np.mean(y[nn] != y))


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return np.where((p == 0) | (p == 1), 0.0, h)


def e5(X, y) -> float:
    """Mean base-2 entropy of label disagreement among the 5 nearest neighbours."""
    y = np.asarray(y)
    if y.size < E5_NEIGHBORS + 1:
        raise ValueError(f"E5 needs at least {E5_NEIGHBORS + 1} samples")
    nbrs = knn_all(X, E5_NEIGHBORS)
    p = np.mean(y[nbrs] != y[:, None], axis=1)
    return float(np.mean(_binary_entropy(p)))


def c1_class(y, n_classes: int = 2) -> float:
    """Class-proportion entropy normalized by log C."""
    _, counts = np.unique(np.asarray(y), return_counts=True)
    n_classes = max(n_classes, counts.size)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum() / math.log(n_classes))


def c1_reg(X, y) -> float:
    """Largest absolute Spearman correlation between a feature and the target."""
    X = _as_matrix(X)
    if X.shape[1] == 0:
        return 0.0
    return max(abs(spearman_rho(X[:, j], y)) for j in range(X.shape[1]))


def l1_linearity(X, y) -> float:
    """Mean absolute residual of a least-squares fit on the full data."""
    return ols_fit(X, y).residual_mean_abs


def s3(X, y) -> float:
    """Mean squared leave-one-out 1-NN regression error."""
    y = np.asarray(y, dtype=float)
    nn = knn_all(X, 1)[:, 0]
    return float(np.mean((y[nn] - y) ** 2))


def profile(ds, name: str | None = None) -> ComplexityProfile:
    """Compute every descriptor applicable to the dataset's task."""
    X, y = ds.features, ds.target
    n, d, t2, t3 = size_sparsity_metrics(X)
    common = dict(task=ds.task, n_samples=n, n_features=d, t2=t2, t3=t3,
                  name=name if name is not None else ds.name)
    if ds.task == "classification":
        return ComplexityProfile(
            **common, fisher_f1=fisher_f1(X, y), n3=n3(X, y), e5=e5(X, y), c1_class=c1_class(y)
        )
    return ComplexityProfile(**common, c1_reg=c1_reg(X, y), l1=l1_linearity(X, y), s3=s3(X, y))


def metric_correlation(profiles, task: str | None = None, metrics=None):
    """Pairwise Spearman correlations between metrics across datasets.

    ``metrics`` defaults to every descriptor of the task.
    Returns ``(metric_names, matrix)``.
    """
    profiles = list(profiles)
    if len(profiles) < 3:
        raise ValueError("need at least 3 profiles")
    task = task or profiles[0].task
    if any(p.task != task for p in profiles):
        raise ValueError("profiles mix tasks")
    if metrics is None:
        metrics = CLASSIFICATION_METRICS if task == "classification" else REGRESSION_METRICS
    names = list(metrics)
    values = np.array([[p.get(m) for m in names] for p in profiles])
    k = len(names)
    corr = np.eye(k)
    for a in range(k):
        for b in range(a + 1, k):
            corr[a, b] = corr[b, a] = spearman_rho(values[:, a], values[:, b])
    return names, corr
