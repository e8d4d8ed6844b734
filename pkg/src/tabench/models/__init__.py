"""Native interpretable learners, their search spaces and the model registry."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from tabench.models.base import (
    BudgetExceeded,
    Deadline,
    FittedModel,
    ModelComplexity,
    count_nonzero,
    model_complexity,
)
from tabench.models.gnb import GaussianNBModel, gnb_fit
from tabench.models.knn import KNNModel, knn_predict
from tabench.models.linear import (
    LinearModel,
    PolyLassoModel,
    expand_polynomial,
    linear_family_fit,
    polynomial_width,
)
from tabench.models.logistic import LogisticModel, logistic_fit
from tabench.models.search import Param, RandomSampler, SearchResult, random_search
from tabench.models.tree import DecisionTreeModel, tree_fit

BOTH = ("classification", "regression")
CLF = ("classification",)
REGR = ("regression",)


def _depth_range(n_samples, n_features):
    return Param("max_depth", "int", 2, max(2, min(6, int(n_features / 2 + 1))))


def _neighbors_range(n_samples, n_features):
    high = min(100, int(0.2 * n_samples))
    return Param("n_neighbors", "int", min(3, n_samples), max(min(3, n_samples), min(high, n_samples)))


def _space_linear(n, d):
    return []


def _space_lasso(n, d):
    return [Param("alpha", "real", 1e-4, 1e2, "log")]


def _space_glm(n, d):
    return [Param("alpha", "real", 1e-4, 1e1, "log")]


def _space_poly(n, d):
    return [Param("degree", "categorical", choices=(2, 3)), Param("alpha", "real", 1e-4, 1e2, "log")]


def _space_logistic(n, d):
    return [Param("C", "real", 1e-2, 1e1, "log"), Param("penalty", "categorical", choices=("l2", "none"))]


def _space_tree_clf(n, d):
    return [
        Param("min_samples_leaf", "real", 0.01, 0.3),
        Param("criterion", "categorical", choices=("gini", "entropy")),
        _depth_range(n, d),
    ]


def _space_tree_regr(n, d):
    return [_depth_range(n, d)]


def _space_knn(n, d):
    return [_neighbors_range(n, d)]


def _space_gnb(n, d):
    return [Param("var_smoothing", "real", 1e-12, 1e-1, "log")]


@dataclass(frozen=True)
class Family:
    name: str
    build: Callable[[str, dict], FittedModel]
    space: Callable[[int, int], list]
    tasks: tuple


FAMILIES: dict[str, Family] = {}


def register_family(name, build, space=_space_linear, tasks=BOTH):
    """Add a learner family; ``build(task, params)`` returns an unfitted model."""
    FAMILIES[name] = Family(name, build, space, tuple(tasks))
    return FAMILIES[name]


register_family("linear", lambda t, p: LinearModel("none"), _space_linear, REGR)
register_family("lasso", lambda t, p: LinearModel("l1", p["alpha"]), _space_lasso, REGR)
register_family("glm_ridge", lambda t, p: LinearModel("l2", p["alpha"]), _space_glm, REGR)
register_family("poly_lasso", lambda t, p: PolyLassoModel(p["degree"], p["alpha"]), _space_poly, REGR)
register_family("logistic", lambda t, p: LogisticModel(p["penalty"], p["C"]), _space_logistic, CLF)
register_family(
    "tree_clf",
    lambda t, p: DecisionTreeModel("classification", p["criterion"], p["max_depth"], p["min_samples_leaf"]),
    _space_tree_clf, CLF,
)
register_family("tree_regr", lambda t, p: DecisionTreeModel("regression", "mse", p["max_depth"], 1),
                _space_tree_regr, REGR)
register_family("knn_clf", lambda t, p: KNNModel("classification", p["n_neighbors"]), _space_knn, CLF)
register_family("knn_regr", lambda t, p: KNNModel("regression", p["n_neighbors"]), _space_knn, REGR)
register_family("gnb", lambda t, p: GaussianNBModel(p["var_smoothing"]), _space_gnb, CLF)


@dataclass(frozen=True)
class ModelSpec:
    """A learner identity plus fixed hyperparameters and search-range overrides.

    ``space_overrides`` maps a parameter name to ``[low, high]`` or to a list
    of categorical choices. ``hyperparameters`` pins values and removes them
    from the search.
    """

    family: str
    model_id: str = ""
    hyperparameters: dict = field(default_factory=dict)
    space_overrides: dict = field(default_factory=dict)
    predictions: str | None = None

    def __post_init__(self):
        if self.family != "external" and self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        if self.family == "external" and not self.predictions:
            raise ValueError("external models need a predictions file")
        if not self.model_id:
            object.__setattr__(self, "model_id", self.family)

    @property
    def is_external(self) -> bool:
        return self.family == "external"

    def supports(self, task: str) -> bool:
        return self.is_external or task in FAMILIES[self.family].tasks

    def search_space(self, n_samples: int, n_features: int) -> list[Param]:
        space = []
        for p in FAMILIES[self.family].space(n_samples, n_features):
            if p.name in self.hyperparameters:
                continue
            override = self.space_overrides.get(p.name)
            if override is not None:
                if p.kind == "categorical":
                    p = Param(p.name, p.kind, choices=tuple(override))
                else:
                    p = Param(p.name, p.kind, override[0], override[1], p.scale)
            space.append(p)
        return space

    def build(self, task: str, params: dict | None = None) -> FittedModel:
        merged = {**(params or {}), **self.hyperparameters}
        return FAMILIES[self.family].build(task, merged)

    def to_dict(self) -> dict:
        return {"family": self.family, "model_id": self.model_id,
                "hyperparameters": dict(self.hyperparameters),
                "space_overrides": dict(self.space_overrides), "predictions": self.predictions}


__all__ = [
    "BudgetExceeded",
    "DecisionTreeModel",
    "Deadline",
    "FAMILIES",
    "FittedModel",
    "GaussianNBModel",
    "KNNModel",
    "LinearModel",
    "LogisticModel",
    "ModelComplexity",
    "ModelSpec",
    "Param",
    "PolyLassoModel",
    "RandomSampler",
    "SearchResult",
    "count_nonzero",
    "expand_polynomial",
    "gnb_fit",
    "knn_predict",
    "linear_family_fit",
    "logistic_fit",
    "model_complexity",
    "polynomial_width",
    "random_search",
    "register_family",
    "tree_fit",
]
