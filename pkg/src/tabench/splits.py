"""Train/validation/test plans for in-sample and target-shifted evaluation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

N_FOLDS = 4
IN_SAMPLE_FRACTIONS = (0.5, 0.25, 0.25)
REMAINDER_FRACTIONS = (2 / 3, 1 / 3)
_EPS = 1e-9


@dataclass(frozen=True)
class SplitPlan:
    fold_id: int
    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]
    regime: str
    shift_detail: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("train", "validation", "test"):
            object.__setattr__(self, name, tuple(sorted(int(i) for i in getattr(self, name))))
        if self.regime not in ("in_sample", "oos"):
            raise ValueError(f"unknown regime {self.regime!r}")
        a, b, c = set(self.train), set(self.validation), set(self.test)
        if a & b or a & c or b & c:
            raise ValueError("train, validation and test overlap")
        if not self.test:
            raise ValueError("empty test split")

    @property
    def train_validation(self) -> tuple[int, ...]:
        return tuple(sorted(self.train + self.validation))

    def to_dict(self) -> dict:
        return {
            "fold_id": self.fold_id,
            "regime": self.regime,
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
            "shift_detail": dict(self.shift_detail),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPlan":
        return cls(d["fold_id"], d["train"], d["validation"], d["test"], d["regime"],
                   d.get("shift_detail", {}))


@dataclass(frozen=True)
class ShiftConfig:
    f: float = 0.25
    l: float = 0.125
    u: float = 0.5
    seed: int = 0
    alpha_mode: str = "extreme"

    def __post_init__(self):
        if not 0 < self.l < self.u <= 1:
            raise ValueError("need 0 < l < u <= 1")
        if not 0 < self.f < 1:
            raise ValueError("need 0 < f < 1")
        if self.alpha_mode not in ("extreme", "uniform"):
            raise ValueError("alpha_mode must be 'extreme' or 'uniform'")


def plans_to_json(plans, **kwargs) -> str:
    return json.dumps([p.to_dict() for p in plans], **kwargs)


def _rng(seed, *keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *keys]))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def largest_remainder(total: int, fractions) -> list[int]:
    """Integer apportionment of ``total`` by ``fractions`` (ties: earlier part)."""
    quotas = [total * f / sum(fractions) for f in fractions]
    counts = [int(math.floor(q + _EPS)) for q in quotas]
    order = sorted(range(len(quotas)), key=lambda j: (-(quotas[j] - counts[j]), j))
    for j in order[: total - sum(counts)]:
        counts[j] += 1
    return counts


def _allocate(stratum_sizes, fractions) -> np.ndarray:
    """Stratum-by-part count matrix with rows summing to stratum sizes and
    columns summing to the largest-remainder split of the grand total."""
    sizes = np.asarray(stratum_sizes, dtype=int)
    fr = np.asarray(fractions, dtype=float) / sum(fractions)
    quota = sizes[:, None] * fr[None, :]
    counts = np.floor(quota + _EPS).astype(int)
    row_need = sizes - counts.sum(axis=1)
    col_need = np.array(largest_remainder(int(sizes.sum()), fractions)) - counts.sum(axis=0)
    frac = quota - counts
    cells = sorted(
        ((s, j) for s in range(len(sizes)) for j in range(len(fr))),
        key=lambda c: (-frac[c], c[0], c[1]),
    )
    for s, j in cells:
        if row_need[s] > 0 and col_need[j] > 0:
            counts[s, j] += 1
            row_need[s] -= 1
            col_need[j] -= 1
    # greedy can strand a unit; place it in any part that still needs one
    for s in range(len(sizes)):
        while row_need[s] > 0:
            j = int(np.argmax(col_need > 0)) if np.any(col_need > 0) else int(np.argmax(frac[s]))
            counts[s, j] += 1
            row_need[s] -= 1
            col_need[j] -= 1
    return counts


def quantile_bins(y, n_bins: int) -> np.ndarray:
    """Bin id per sample from interpolated quantile edges; ties go to the lower bin."""
    y = np.asarray(y, dtype=float)
    if n_bins <= 1:
        return np.zeros(y.size, dtype=int)
    edges = np.quantile(y, np.arange(1, n_bins) / n_bins, method="linear")
    return np.searchsorted(edges, y, side="left")


def strata_for(y, task: str) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if task == "classification":
        return y.astype(int)
    return quantile_bins(y, min(10, y.size))


def stratified_assign(y, task: str, fractions=IN_SAMPLE_FRACTIONS, seed=0, rng=None):
    """Shuffle each stratum and cut it into parts sized by ``fractions``.

    Classification strata are the classes, regression strata are decile bins
    of the target. Returns one sorted index array per fraction, in positions
    relative to ``y``.
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty target")
    rng = rng if rng is not None else _rng(seed)
    strata = strata_for(y, task)
    labels = np.unique(strata)
    members = [np.flatnonzero(strata == s) for s in labels]
    counts = _allocate([m.size for m in members], fractions)
    parts = [[] for _ in fractions]
    for s, idx in enumerate(members):
        idx = rng.permutation(idx)
        start = 0
        for j, c in enumerate(counts[s]):
            parts[j].append(idx[start:start + c])
            start += c
    return [np.sort(np.concatenate(p)) if p else np.zeros(0, int) for p in parts]


def make_cv_folds(ds, seed: int = 0) -> list[SplitPlan]:
    """Four stratified 50/25/25 folds.

    The data is cut once into four stratified quarters; fold k tests on
    quarter k, validates on quarter k+1 and trains on the other two, so the
    test sets of the four folds partition the dataset.
    """
    n = ds.n_samples
    if n < 8:
        raise ValueError(f"need at least 8 samples for 4 folds, got {n}")
    quarters = stratified_assign(ds.target, ds.task, (0.25,) * N_FOLDS, rng=_rng(seed, 0))
    plans = []
    for k in range(N_FOLDS):
        test = quarters[k]
        val = quarters[(k + 1) % N_FOLDS]
        train = np.concatenate([quarters[(k + 2) % N_FOLDS], quarters[(k + 3) % N_FOLDS]])
        plans.append(SplitPlan(k, train, val, test, "in_sample"))
    return plans


def _split_remainder(rest: np.ndarray, y, task: str, rng) -> tuple[np.ndarray, np.ndarray]:
    train, val = stratified_assign(np.asarray(y)[rest], task, REMAINDER_FRACTIONS, rng=rng)
    return rest[train], rest[val]


def target_positive_count(alpha_d: float, n_test: int, n_pos: int, n_neg: int,
                          cfg: ShiftConfig, rng=None) -> tuple[int, bool]:
    """Number of positives for a shifted test set of size ``n_test``.

    The admissible rate interval is [(l/f) a_D, (u/f) a_D] cut by the
    direction rule (rate moves away from a_D, towards the opposite
    imbalance). The extreme of that interval is used unless
    ``cfg.alpha_mode == "uniform"``. Counts are clamped to what the class
    pools can supply; the second return value reports whether clamping moved
    the count outside the admissible range.
    """
    lo_rate = cfg.l / cfg.f * alpha_d
    hi_rate = cfg.u / cfg.f * alpha_d
    if alpha_d <= 0.5:
        lo_rate, hi_rate = alpha_d, min(hi_rate, 1.0)
    else:
        lo_rate, hi_rate = lo_rate, alpha_d
    lo = math.ceil(lo_rate * n_test - _EPS)
    hi = math.floor(hi_rate * n_test + _EPS)
    feasible_lo = max(0, n_test - n_neg)
    feasible_hi = min(n_test, n_pos)
    lo_ok, hi_ok = max(lo, feasible_lo), min(hi, feasible_hi)
    if lo_ok > hi_ok:
        # no integer count inside the admissible interval: take the nearest feasible count
        target = hi if alpha_d <= 0.5 else lo
        return int(min(max(target, feasible_lo), feasible_hi)), True
    if cfg.alpha_mode == "uniform":
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        return int(rng.integers(lo_ok, hi_ok + 1)), False
    return (hi_ok if alpha_d <= 0.5 else lo_ok), False


def oos_classification(ds, cfg: ShiftConfig | None = None) -> list[SplitPlan]:
    """Four independent class-imbalance-shifted splits.

    Positive-heavy datasets get a test set with fewer positives and vice
    versa. Two samples of each class are kept out of the test set so that
    training and validation both see each class.
    """
    cfg = cfg or ShiftConfig()
    y = np.asarray(ds.target)
    n = y.size
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("classification dataset has a single class")
    alpha_d = pos.size / n
    n_test = _round_half_up(cfg.f * n)
    reserve = 2
    plans = []
    for k in range(N_FOLDS):
        rng = _rng(cfg.seed, 1, k)
        n_pos_test, clamped = target_positive_count(
            alpha_d, n_test, max(pos.size - reserve, 0), max(neg.size - reserve, 0), cfg, rng
        )
        n_neg_test = n_test - n_pos_test
        if n_pos_test > pos.size - reserve or n_neg_test > neg.size - reserve or n_test <= 0:
            raise ValueError("not enough samples of each class for a shifted test set")
        test = np.concatenate([rng.choice(pos, n_pos_test, replace=False),
                               rng.choice(neg, n_neg_test, replace=False)])
        rest = np.setdiff1d(np.arange(n), test)
        train, val = _split_remainder(rest, y, "classification", rng)
        detail = {"alpha": n_pos_test / n_test, "alpha_dataset": alpha_d, "clamped": clamped}
        plans.append(SplitPlan(k, train, val, test, "oos", detail))
    return plans


def oos_regression(ds, seed: int = 0) -> list[SplitPlan]:
    """Fold q tests on the q-th target quartile and trains on the rest."""
    y = np.asarray(ds.target, dtype=float)
    if y.size < 8:
        raise ValueError(f"need at least 8 samples, got {y.size}")
    quartile = quantile_bins(y, N_FOLDS)
    plans = []
    for q in range(N_FOLDS):
        test = np.flatnonzero(quartile == q)
        if test.size == 0:
            raise ValueError(f"quartile {q + 1} is empty (too many tied targets)")
        rest = np.flatnonzero(quartile != q)
        train, val = _split_remainder(rest, y, "regression", _rng(seed, 2, q))
        plans.append(SplitPlan(q, train, val, test, "oos", {"excluded_quartile": q + 1}))
    return plans


def make_plans(ds, regime: str, seed: int = 0, shift: ShiftConfig | None = None) -> list[SplitPlan]:
    if regime in ("is", "in_sample"):
        return make_cv_folds(ds, seed)
    if regime != "oos" and regime != "out_of_sample":
        raise ValueError(f"unknown regime {regime!r}")
    if ds.task == "classification":
        cfg = shift or ShiftConfig(seed=seed)
        return oos_classification(ds, cfg)
    return oos_regression(ds, seed)
