"""Scoring, the model x dataset x fold campaign, and median aggregation."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from tabench.data import fit_robust_scaler
from tabench.models import BudgetExceeded, Deadline, ModelSpec, random_search
from tabench.models.external import external_predictions_load
from tabench.splits import ShiftConfig, make_plans

log = logging.getLogger(__name__)

CSV_HEADER = ["dataset_id", "model_id", "fold_id", "regime", "metric", "value", "fit_seconds", "status"]
REGRESSION_METRICS = ("r2", "mse", "mae")
CLASSIFICATION_METRICS = ("f1", "precision", "recall", "accuracy")
PRIMARY_METRIC = {"regression": "r2", "classification": "f1"}
DEFAULT_FINAL_FIT_SECONDS = 300.0


@dataclass(frozen=True)
class ScoreSet:
    r2: float | None = None
    mse: float | None = None
    mae: float | None = None
    f1: float | None = None
    precision: float | None = None
    recall: float | None = None
    accuracy: float | None = None

    def items(self):
        return [(k, v) for k, v in asdict(self).items() if v is not None]

    def get(self, metric: str) -> float:
        value = getattr(self, metric)
        if value is None:
            raise KeyError(metric)
        return value


def _pair(y, y_hat):
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.size} targets vs {y_hat.size} predictions")
    if y.size == 0:
        raise ValueError("empty score input")
    return y, y_hat


def regression_scores(y, y_hat) -> ScoreSet:
    """R^2, MSE and MAE.

    A constant target gives R^2 = 1 for a perfect fit and ``-inf`` otherwise;
    that sentinel is dropped during aggregation.
    """
    y, y_hat = _pair(y, y_hat)
    resid = y - y_hat
    sse = float(resid @ resid)
    centred = y - y.mean()
    sst = float(centred @ centred)
    if sst == 0.0:
        r2 = 1.0 if sse == 0.0 else -math.inf
    else:
        r2 = 1.0 - sse / sst
    return ScoreSet(r2=r2, mse=sse / y.size, mae=float(np.mean(np.abs(resid))))


def classification_scores(y, y_hat) -> ScoreSet:
    """F1, precision, recall and accuracy with class 1 as the positive class."""
    y, y_hat = _pair(y, y_hat)
    tp = float(np.sum((y == 1) & (y_hat == 1)))
    fp = float(np.sum((y == 0) & (y_hat == 1)))
    fn = float(np.sum((y == 1) & (y_hat == 0)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return ScoreSet(f1=f1, precision=precision, recall=recall, accuracy=float(np.mean(y == y_hat)))


def score(task: str, y, y_hat) -> ScoreSet:
    return classification_scores(y, y_hat) if task == "classification" else regression_scores(y, y_hat)


@dataclass
class ResultRow:
    dataset_id: str
    model_id: str
    fold_id: int
    regime: str
    scores: ScoreSet | None = None
    fit_seconds: float | None = None
    status: str = "ok"
    error: str = ""
    params: dict = field(default_factory=dict)
    complexity: dict = field(default_factory=dict)
    trials: int = 0

    @property
    def key(self):
        return (self.dataset_id, self.model_id, self.fold_id, self.regime)


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


class ResultTable:
    """Rows keyed by (dataset, model, fold, regime); kept sorted by key."""

    def __init__(self, rows=()):
        self._rows: dict = {}
        for row in rows:
            self.add(row)

    def add(self, row: ResultRow):
        if row.status != "ok" and row.scores is not None:
            raise ValueError("only ok rows carry scores")
        if row.key in self._rows:
            raise ValueError(f"duplicate result row {row.key}")
        self._rows[row.key] = row

    @property
    def rows(self) -> list[ResultRow]:
        return [self._rows[k] for k in sorted(self._rows)]

    def __len__(self):
        return len(self._rows)

    def __iter__(self):
        return iter(self.rows)

    def to_csv(self, path=None, timing: bool = True, provenance: str | None = None) -> str:
        """Long-format CSV: one line per metric, one bare line for timeout/failed rows.

        ``timing=False`` leaves ``fit_seconds`` blank for natively timed rows so
        the file is reproducible byte for byte.
        """
        buf = io.StringIO()
        if provenance:
            buf.write(f"# {provenance}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            seconds = _fmt(r.fit_seconds) if (timing or r.params.get("_timing") == "file") else ""
            base = [r.dataset_id, r.model_id, r.fold_id, r.regime]
            if r.scores is None:
                writer.writerow(base + ["", "", seconds, r.status])
                continue
            for metric, value in r.scores.items():
                writer.writerow(base + [metric, _fmt(value), seconds, r.status])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None, timing: bool = True, provenance: dict | None = None) -> str:
        rows = []
        for r in self.rows:
            d = {
                "dataset_id": r.dataset_id, "model_id": r.model_id, "fold_id": r.fold_id,
                "regime": r.regime, "status": r.status, "error": r.error,
                "scores": dict(r.scores.items()) if r.scores else None,
                "fit_seconds": r.fit_seconds if timing else None,
                "params": {k: v for k, v in r.params.items() if not k.startswith("_")},
                "complexity": r.complexity, "trials": r.trials,
            }
            rows.append(d)
        text = json.dumps({"provenance": provenance or {}, "rows": rows}, indent=1, sort_keys=True,
                          default=_json_default)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "ResultTable":
        with open(path, newline="", encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        reader = csv.DictReader(lines)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        grouped: dict = {}
        for rec in reader:
            key = (rec["dataset_id"], rec["model_id"], int(rec["fold_id"]), rec["regime"])
            entry = grouped.setdefault(key, {"status": rec["status"], "scores": {}, "seconds": rec["fit_seconds"]})
            if rec["metric"]:
                entry["scores"][rec["metric"]] = float(rec["value"])
        table = cls()
        for key, e in grouped.items():
            scores = ScoreSet(**e["scores"]) if e["status"] == "ok" else None
            seconds = float(e["seconds"]) if e["seconds"] else None
            table.add(ResultRow(*key, scores=scores, fit_seconds=seconds, status=e["status"]))
        return table


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def task_seed(dataset_id: str, model_id: str, fold_id: int, global_seed: int) -> int:
    digest = hashlib.sha256(f"{dataset_id}|{model_id}|{fold_id}|{global_seed}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def dataset_seed(dataset_id: str, global_seed: int) -> int:
    digest = hashlib.sha256(f"{dataset_id}|splits|{global_seed}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass(frozen=True)
class Budgets:
    trials: int = 50
    search_seconds: float = 6000.0
    final_fit_seconds: float = DEFAULT_FINAL_FIT_SECONDS


def _plain(params: dict) -> dict:
    return {k: (v.item() if isinstance(v, np.generic) else v) for k, v in params.items()}


def _run_native(ds, plan, spec: ModelSpec, regime: str, budgets: Budgets, global_seed: int) -> ResultRow:
    row = ResultRow(ds.name, spec.model_id, plan.fold_id, regime)
    metric = PRIMARY_METRIC[ds.task]
    train = np.array(plan.train, dtype=int)
    val = np.array(plan.validation, dtype=int)
    test = np.array(plan.test, dtype=int)
    scaler = fit_robust_scaler(ds.features, train)
    X = scaler.transform(ds.features)
    y = ds.target
    try:
        space = spec.search_space(train.size, ds.n_features)
        best = {}
        if space and val.size:
            seed = task_seed(ds.name, spec.model_id, plan.fold_id, global_seed)

            def objective(params):
                m = spec.build(ds.task, params).fit(X[train], y[train], Deadline(budgets.search_seconds))
                return score(ds.task, y[val], m.predict(X[val])).get(metric)

            result = random_search(space, objective, budgets.trials, budgets.search_seconds, seed)
            best, row.trials = result.best_params, len(result.trials)
        elif space:
            best = {p.name: (p.choices[0] if p.kind == "categorical" else p.low) for p in space}
        fit_rows = np.concatenate([train, val])
        model = spec.build(ds.task, best)
        deadline = Deadline(budgets.final_fit_seconds)
        model.fit(X[fit_rows], y[fit_rows], deadline)
        row.fit_seconds = model.fit_seconds
        row.params = _plain(best)
        if deadline.expired:
            raise BudgetExceeded(f"final fit took {model.fit_seconds:.2f} s")
        row.scores = score(ds.task, y[test], model.predict(X[test]))
        row.complexity = model.complexity().to_dict()
    except BudgetExceeded as exc:
        row.status, row.scores, row.error = "timeout", None, str(exc)
        row.fit_seconds = budgets.final_fit_seconds if row.fit_seconds is None else row.fit_seconds
    except Exception as exc:  # noqa: BLE001 - one failing learner never aborts the campaign
        row.status, row.scores, row.error = "failed", None, f"{type(exc).__name__}: {exc}"
        log.warning("%s / %s / fold %d failed: %s", ds.name, spec.model_id, plan.fold_id, row.error)
    return row


def _run_external(ds, plan, spec: ModelSpec, regime: str, predictions) -> ResultRow:
    row = ResultRow(ds.name, spec.model_id, plan.fold_id, regime, params={"_timing": "file"})
    try:
        y_hat = predictions.for_fold(ds.name, plan.fold_id, plan.test)
        row.scores = score(ds.task, ds.target[list(plan.test)], y_hat)
        row.fit_seconds = predictions.seconds_for(ds.name, plan.fold_id)
    except Exception as exc:  # noqa: BLE001
        row.status, row.error = "failed", f"{type(exc).__name__}: {exc}"
    return row


def run_benchmark(datasets, model_specs, regime: str = "is", seed: int = 0,
                  budgets: Budgets | None = None, jobs: int = 1,
                  shift: ShiftConfig | None = None, plans: dict | None = None) -> ResultTable:
    """Tune, refit and score every (dataset, model, fold).

    For each fold the scaler is fitted on the training rows, hyperparameters
    are chosen by random search on the validation rows, and the final model is
    refitted on train + validation under ``budgets.final_fit_seconds``. Task
    seeds depend only on (dataset, model, fold, seed), so the table does not
    depend on ``jobs`` or scheduling order.
    """
    budgets = budgets or Budgets()
    regime_name = "in_sample" if regime in ("is", "in_sample") else "oos"
    external = {s.model_id: external_predictions_load(s.predictions)
                for s in model_specs if s.is_external}
    tasks = []
    for ds in datasets:
        ds_plans = (plans or {}).get(ds.name)
        if ds_plans is None:
            sd = dataset_seed(ds.name, seed)
            cfg = None if shift is None else ShiftConfig(shift.f, shift.l, shift.u, sd, shift.alpha_mode)
            ds_plans = make_plans(ds, regime_name, sd, cfg)
        for spec in model_specs:
            if not spec.supports(ds.task):
                continue
            for plan in ds_plans:
                tasks.append((ds, plan, spec))

    def run(task):
        ds, plan, spec = task
        if spec.is_external:
            return _run_external(ds, plan, spec, regime_name, external[spec.model_id])
        return _run_native(ds, plan, spec, regime_name, budgets, seed)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, tasks))
    else:
        rows = [run(t) for t in tasks]
    return ResultTable(rows)


@dataclass(frozen=True)
class MedianCell:
    value: float | None
    n_used: int
    n_excluded: int

    @property
    def missing(self) -> bool:
        return self.value is None


def aggregate_median(rt: ResultTable, metric: str) -> dict:
    """Median over folds per (dataset, model).

    Timeout, failed and non-finite folds are excluded and counted; a cell
    with no usable fold has ``value=None``.
    """
    groups: dict = {}
    for r in rt:
        used, excluded = groups.setdefault((r.dataset_id, r.model_id), ([], [0]))
        value = None
        if r.status == "ok" and r.scores is not None:
            value = getattr(r.scores, metric)
        if value is None or not math.isfinite(value):
            excluded[0] += 1
        else:
            used.append(value)
    out = {}
    for key, (used, excluded) in sorted(groups.items()):
        if excluded[0]:
            warnings.warn(f"{key}: {excluded[0]} fold(s) excluded from the {metric} median", stacklevel=2)
        out[key] = MedianCell(float(np.median(used)) if used else None, len(used), excluded[0])
    return out


def median_scores(cells: dict) -> dict:
    """``{dataset: {model: value}}`` from :func:`aggregate_median`, skipping missing cells."""
    out: dict = {}
    for (dataset, model), cell in cells.items():
        if not cell.missing:
            out.setdefault(dataset, {})[model] = cell.value
    return out
