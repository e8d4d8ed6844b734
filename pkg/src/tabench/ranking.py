"""Per-dataset ranks, Friedman test, Nemenyi critical difference and stratification."""
from __future__ import annotations

import json
import math
import warnings
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from itertools import permutations

import numpy as np
from scipy.stats import chi2, rankdata

SIGNIFICANCE = 0.05

# Studentized range quantile q(1 - alpha, k, inf) / sqrt(2) for k = 2..20,
# generated by scripts/derive_nemenyi_q.py.
NEMENYI_Q = {
    0.05: (1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948320, 3.030878,
           3.101730, 3.163684, 3.218654, 3.268004, 3.312739, 3.353618, 3.391230,
           3.426041, 3.458425, 3.488685, 3.517073, 3.543799),
    0.10: (1.644854, 2.052293, 2.291341, 2.459516, 2.588521, 2.692732, 2.779884,
           2.854606, 2.919889, 2.977768, 3.029694, 3.076733, 3.119693, 3.159199,
           3.195743, 3.229723, 3.261461, 3.291224, 3.319233),
}


def assign_ranks(scores: dict, higher_is_better: bool = True) -> dict:
    """Rank 1 for the best model; ties share the average of their ranks.

    Models whose score is missing or not finite are left out.
    """
    kept = {m: float(s) for m, s in scores.items() if s is not None and math.isfinite(s)}
    dropped = sorted(set(scores) - set(kept))
    if dropped:
        warnings.warn(f"models without a usable score left unranked: {dropped}", stacklevel=2)
    if len(kept) < 2:
        raise ValueError("need at least 2 scored models to rank")
    models = list(kept)
    values = np.array([kept[m] for m in models])
    ranks = rankdata(-values if higher_is_better else values, method="average")
    return {m: float(r) for m, r in zip(models, ranks)}


# largest dataset count per model count for which the exact null is enumerated
EXACT_MAX_DATASETS = {2: 60, 3: 30, 4: 20, 5: 10}


def _statistic(col_sums, n: int, k: int) -> float:
    return 12.0 / (n * k * (k + 1)) * float(np.dot(col_sums, col_sums)) - 3.0 * n * (k + 1)


@lru_cache(maxsize=64)
def _exact_null(rows: tuple) -> tuple:
    """Null distribution of the sorted rank-sum vector.

    Each row's ranks are permuted uniformly and independently. ``rows`` holds
    the sorted rank pattern of every dataset (doubled, so tied half ranks stay
    integral). Returns ``(states, weights)``.
    """
    states = {(0,) * len(rows[0]): 1}
    for row in rows:
        perms = list(permutations(row))
        nxt = defaultdict(int)
        for s, count in states.items():
            for p in perms:
                nxt[tuple(sorted(a + b for a, b in zip(s, p)))] += count
        states = nxt
    keys = tuple(states)
    return keys, tuple(states[key] for key in keys)


def friedman_exact_p(rank_matrix) -> float:
    """P(statistic >= observed) under independent within-dataset permutations."""
    R = np.asarray(rank_matrix, dtype=float)
    n, k = R.shape
    doubled = np.rint(2 * R).astype(int)
    rows = tuple(sorted(tuple(sorted(r)) for r in doubled.tolist()))
    observed = _statistic(R.sum(axis=0), n, k)
    states, weights = _exact_null(rows)
    stats = np.array([_statistic(np.array(s) / 2.0, n, k) for s in states])
    w = np.array(weights, dtype=float)
    return float(w[stats >= observed - 1e-9].sum() / w.sum())


def friedman_test(rank_matrix, exact: bool | None = None) -> tuple[float, float]:
    """Friedman statistic and p-value.

    Rows are datasets, columns models; rows containing NaN are dropped. The
    p-value comes from the exact permutation distribution for small designs
    (see ``EXACT_MAX_DATASETS``) and from the chi-square approximation with
    k - 1 degrees of freedom otherwise; ``exact`` forces either route.
    """
    R = np.asarray(rank_matrix, dtype=float)
    if R.ndim != 2:
        raise ValueError("rank matrix must be 2-D")
    complete = ~np.isnan(R).any(axis=1)
    if not complete.all():
        warnings.warn(f"dropping {int((~complete).sum())} incomplete dataset row(s)", stacklevel=2)
        R = R[complete]
    n, k = R.shape
    if n < 2 or k < 2:
        raise ValueError(f"need at least 2 datasets and 2 models, got {n} x {k}")
    stat = _statistic(R.sum(axis=0), n, k)
    stat = max(stat, 0.0) if abs(stat) > 1e-12 else 0.0
    if exact is None:
        exact = n <= EXACT_MAX_DATASETS.get(k, 0)
    if exact and np.allclose(2 * R, np.rint(2 * R)):
        return stat, min(1.0, friedman_exact_p(R))
    return stat, float(chi2.sf(stat, k - 1))


def nemenyi_cd(k: int, n: int, alpha: float = SIGNIFICANCE) -> float:
    """Critical difference q_alpha * sqrt(k (k + 1) / (6 N))."""
    table = NEMENYI_Q.get(round(alpha, 10))
    if table is None:
        raise ValueError(f"unsupported alpha {alpha}; use 0.05 or 0.10")
    if not 2 <= k <= 20:
        raise ValueError(f"unsupported model count k={k}; 2..20 supported")
    if n < 2:
        raise ValueError("need at least 2 datasets")
    return table[k - 2] * math.sqrt(k * (k + 1) / (6.0 * n))


def indistinguishable_groups(avg_ranks: dict, cd: float) -> list[list[str]]:
    """Maximal runs of rank-ordered models whose spread is within ``cd``."""
    ordered = sorted(avg_ranks, key=lambda m: (avg_ranks[m], m))
    values = [avg_ranks[m] for m in ordered]
    groups, last_end = [], -1
    for i in range(len(ordered)):
        j = i
        while j + 1 < len(ordered) and values[j + 1] - values[i] <= cd + 1e-12:
            j += 1
        if j > last_end:
            groups.append(ordered[i:j + 1])
            last_end = j
    return groups


@dataclass
class RankReport:
    average_ranks: dict
    n_datasets: int
    friedman_statistic: float | None = None
    p_value: float | None = None
    nemenyi_cd: float | None = None
    significant: bool = False
    indistinguishable_groups: list = field(default_factory=list)
    stratum_definition: dict = field(default_factory=dict)
    datasets: list = field(default_factory=list)
    insufficient: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def rank_report(scores: dict, higher_is_better: bool = True, alpha: float = SIGNIFICANCE,
                stratum_definition: dict | None = None) -> RankReport:
    """Ranks, Friedman test and Nemenyi grouping over ``{dataset: {model: score}}``.

    Only models scored on every dataset are compared; datasets missing one of
    them are dropped. Pairwise grouping is applied only when Friedman rejects;
    otherwise every model shares one group.
    """
    notes = []
    datasets = sorted(scores)
    per_ds = {d: {m: v for m, v in scores[d].items() if v is not None and math.isfinite(v)}
              for d in datasets}
    models = sorted(set().union(*(set(v) for v in per_ds.values()))) if per_ds else []
    full = [d for d in datasets if set(per_ds[d]) == set(models)]
    if len(full) < len(datasets):
        notes.append(f"dropped {len(datasets) - len(full)} dataset(s) with incomplete scores")
    stratum = stratum_definition or {}
    if len(full) < 2 or len(models) < 2:
        return RankReport({}, len(full), stratum_definition=stratum, datasets=full,
                          insufficient=True, notes=notes + ["fewer than 2 datasets or models"])
    matrix = np.array([[assign_ranks(per_ds[d], higher_is_better)[m] for m in models] for d in full])
    avg = {m: float(v) for m, v in zip(models, matrix.mean(axis=0))}
    stat, p = friedman_test(matrix)
    report = RankReport(avg, len(full), stat, p, stratum_definition=stratum, datasets=full, notes=notes)
    if 2 <= len(models) <= 20:
        report.nemenyi_cd = nemenyi_cd(len(models), len(full), alpha)
    report.significant = p < alpha
    if report.significant and report.nemenyi_cd is not None:
        report.indistinguishable_groups = indistinguishable_groups(avg, report.nemenyi_cd)
    else:
        report.indistinguishable_groups = [sorted(avg, key=lambda m: (avg[m], m))]
    return report


def stratum_edges(values, bins: str) -> list[float]:
    n_bins = {"terciles": 3, "halves": 2}.get(bins)
    if n_bins is None:
        raise ValueError("bins must be 'terciles' or 'halves'")
    qs = np.arange(1, n_bins) / n_bins
    return [float(e) for e in np.quantile(np.asarray(values, float), qs, method="linear")]


def assign_strata(values: dict, bins: str) -> tuple[list[list[str]], list[float]]:
    """Datasets per bin; a value equal to an inner edge belongs to both neighbours."""
    vals = np.array(list(values.values()), dtype=float)
    if vals.size == 0:
        return [], []
    if np.all(vals == vals[0]):
        warnings.warn("all metric values identical; using a single stratum", stacklevel=2)
        return [sorted(values)], []
    edges = stratum_edges(vals, bins)
    bounds = [-math.inf] + edges + [math.inf]
    members = []
    for b in range(len(bounds) - 1):
        lo, hi = bounds[b], bounds[b + 1]
        members.append(sorted(d for d, v in values.items() if lo <= v <= hi))
    return members, edges


def stratified_ranking(metric_values: dict, scores: dict, metric: str, bins: str = "terciles",
                       higher_is_better: bool = True, alpha: float = SIGNIFICANCE) -> list[RankReport]:
    """One :class:`RankReport` per metric bin.

    ``metric_values`` maps dataset to its descriptor value, ``scores`` maps
    dataset to ``{model: aggregated score}``.
    """
    values = {d: float(v) for d, v in metric_values.items() if d in scores and v is not None}
    members, edges = assign_strata(values, bins)
    bounds = [-math.inf] + edges + [math.inf]
    reports = []
    for b, datasets in enumerate(members):
        definition = {
            "metric": metric,
            "bins": bins if edges else "single",
            "bin_index": b,
            "lower": None if math.isinf(bounds[b]) else bounds[b],
            "upper": None if math.isinf(bounds[b + 1]) else bounds[b + 1],
            "dataset_count": len(datasets),
        }
        report = rank_report({d: scores[d] for d in datasets}, higher_is_better, alpha, definition)
        if len(datasets) < 2:
            report.insufficient = True
        reports.append(report)
    return reports


def cd_diagram_data(report: RankReport) -> dict:
    """Everything an external plotter needs for a bracketed critical-difference diagram."""
    ordered = sorted(report.average_ranks, key=lambda m: (report.average_ranks[m], m))
    return {
        "models": [{"model": m, "average_rank": report.average_ranks[m]} for m in ordered],
        "critical_difference": report.nemenyi_cd,
        "friedman_p_value": report.p_value,
        "significant": report.significant,
        "groups": [list(g) for g in report.indistinguishable_groups],
        "n_datasets": report.n_datasets,
        "stratum": report.stratum_definition,
    }
