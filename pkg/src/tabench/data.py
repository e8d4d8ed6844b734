"""Loading raw CSV tables and turning them into model-ready datasets.

The pipeline is deterministic: drop sparse columns, drop incomplete rows,
one-hot encode categoricals, and (per split) apply median/IQR scaling.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

MISSING_TOKENS = frozenset({"", "NA"})
COLUMN_MISSING_LIMIT = 0.30
MIN_RETAINED_FRACTION = 0.5
MIN_SAMPLES = 8
TASKS = ("classification", "regression")

_TASK_ALIASES = {
    "clf": "classification",
    "classification": "classification",
    "regr": "regression",
    "regression": "regression",
}


class DataError(ValueError):
    """Raised when an input table cannot be turned into a dataset."""


def normalize_task(task: str) -> str:
    try:
        return _TASK_ALIASES[task]
    except KeyError:
        raise DataError(f"unknown task {task!r}; expected one of clf, regr") from None


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class RawTable:
    """Cell grid with per-column kinds; ``None`` marks a missing cell."""

    columns: dict[str, list[str | None]]
    kinds: dict[str, str]
    target: list[str | None]
    target_name: str
    task: str

    @property
    def n_rows(self) -> int:
        return len(self.target)

    @property
    def feature_names(self) -> list[str]:
        return list(self.columns)


@dataclass(frozen=True)
class PreprocessReport:
    original_columns: int
    original_rows: int
    dropped_columns: dict[str, float] = field(default_factory=dict)
    dropped_rows: int = 0
    retained_column_fraction: float = 1.0
    retained_row_fraction: float = 1.0
    constant_categoricals: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return (
            self.retained_column_fraction >= MIN_RETAINED_FRACTION
            and self.retained_row_fraction >= MIN_RETAINED_FRACTION
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["accepted"] = self.accepted
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable encoded feature matrix plus target.

    ``column_origin[j]`` names the raw column that produced encoded column j,
    ``column_kinds[j]`` is ``"numeric"`` or ``"indicator"``.
    """

    features: np.ndarray
    target: np.ndarray
    task: str
    column_names: tuple[str, ...]
    column_origin: tuple[str, ...] = ()
    column_kinds: tuple[str, ...] = ()
    name: str = "dataset"

    def __post_init__(self):
        X = _readonly(self.features)
        y = _readonly(self.target)
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        n, d = X.shape
        if y.shape != (n,):
            raise DataError(f"target length {y.shape} does not match {n} rows")
        task = normalize_task(self.task)
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise DataError("dataset contains missing or non-finite values")
        if n < MIN_SAMPLES:
            raise DataError(f"need at least {MIN_SAMPLES} samples, got {n}")
        if task == "classification":
            if not np.all((y == 0) | (y == 1)):
                raise DataError("classification targets must be 0 or 1")
            if y.min() == y.max():
                raise DataError("classification target has a single class")
        names = tuple(self.column_names)
        if len(names) != d:
            raise DataError("column_names length does not match feature count")
        origin = tuple(self.column_origin) or names
        kinds = tuple(self.column_kinds) or ("numeric",) * d
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "task", task)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "column_origin", origin)
        object.__setattr__(self, "column_kinds", kinds)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def with_features(self, features: np.ndarray) -> "Dataset":
        return replace(self, features=features)

    def subset(self, rows) -> tuple[np.ndarray, np.ndarray]:
        rows = np.asarray(rows, dtype=int)
        return self.features[rows], self.target[rows]


def load_table(path, target_column: str, task: str, categorical=None) -> RawTable:
    """Parse a headed UTF-8 CSV into a :class:`RawTable`.

    A column is categorical when any non-missing cell fails numeric parsing,
    or when it is listed in ``categorical``.
    """
    task = normalize_task(task)
    if not os.path.exists(path):
        raise DataError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [r for r in reader if r]
    header = [h.strip() for h in header]
    if target_column not in header:
        raise DataError(f"target not found: {target_column!r}")
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")
    forced = set(categorical or ())
    unknown = forced - set(header)
    if unknown:
        raise DataError(f"unknown categorical columns: {sorted(unknown)}")

    grid: dict[str, list[str | None]] = {h: [] for h in header}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        for h, cell in zip(header, row):
            cell = cell.strip()
            grid[h].append(None if cell in MISSING_TOKENS else cell)

    target = grid.pop(target_column)
    labels = {v for v in target if v is not None}
    if task == "classification" and len(labels) > 2:
        raise DataError(
            f"binary only: target {target_column!r} has {len(labels)} distinct labels"
        )
    if task == "regression" and not all(_is_number(v) for v in labels):
        raise DataError(f"regression target {target_column!r} is not numeric")

    kinds = {}
    for h, cells in grid.items():
        numeric = all(_is_number(c) for c in cells if c is not None)
        kinds[h] = "categorical" if (h in forced or not numeric) else "numeric"
    return RawTable(grid, kinds, target, target_column, task)


def apply_missing_policy(table: RawTable) -> tuple[RawTable, PreprocessReport]:
    """Drop columns over 30% missing, then every row with a missing cell."""
    n = table.n_rows
    n_cols = len(table.columns)
    dropped = {}
    kept = {}
    for name, cells in table.columns.items():
        frac = sum(c is None for c in cells) / n if n else 0.0
        if frac > COLUMN_MISSING_LIMIT:
            dropped[name] = frac
        else:
            kept[name] = cells

    complete = [
        i
        for i in range(n)
        if table.target[i] is not None and all(cells[i] is not None for cells in kept.values())
    ]
    columns = {k: [v[i] for i in complete] for k, v in kept.items()}
    kinds = {k: table.kinds[k] for k in kept}
    out = RawTable(columns, kinds, [table.target[i] for i in complete], table.target_name, table.task)
    report = PreprocessReport(
        original_columns=n_cols,
        original_rows=n,
        dropped_columns=dropped,
        dropped_rows=n - len(complete),
        retained_column_fraction=len(kept) / n_cols if n_cols else 1.0,
        retained_row_fraction=len(complete) / n if n else 0.0,
    )
    return out, report


@dataclass(frozen=True)
class EncodedTable:
    matrix: np.ndarray
    column_names: tuple[str, ...]
    column_origin: tuple[str, ...]
    column_kinds: tuple[str, ...]
    target: list[str]
    task: str
    constant_categoricals: tuple[str, ...] = ()


def one_hot_encode(table: RawTable) -> EncodedTable:
    """Expand every categorical column into one indicator per level.

    All levels are kept (no reference level); levels are ordered by string
    sort. A single-level column yields one constant column and is reported.
    """
    n = table.n_rows
    blocks, names, origin, kinds, constant = [], [], [], [], []
    for col, cells in table.columns.items():
        if any(c is None for c in cells):
            raise DataError(f"column {col!r} still has missing values; apply the missing policy first")
        if table.kinds[col] == "numeric":
            blocks.append(np.array([float(c) for c in cells]).reshape(n, 1))
            names.append(col)
            origin.append(col)
            kinds.append("numeric")
            continue
        levels = sorted(set(cells))
        if len(levels) == 1:
            constant.append(col)
        index = {lvl: j for j, lvl in enumerate(levels)}
        block = np.zeros((n, len(levels)))
        for i, c in enumerate(cells):
            block[i, index[c]] = 1.0
        blocks.append(block)
        names.extend(f"{col}={lvl}" for lvl in levels)
        origin.extend([col] * len(levels))
        kinds.extend(["indicator"] * len(levels))
    matrix = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return EncodedTable(
        matrix, tuple(names), tuple(origin), tuple(kinds), list(table.target), table.task, tuple(constant)
    )


def encode_target(values, task: str) -> np.ndarray:
    """Map target strings to floats; binary labels become 0/1.

    Numeric labels {0, 1} are kept as-is, otherwise the sorted first label
    maps to 0.
    """
    task = normalize_task(task)
    if task == "regression":
        return np.array([float(v) for v in values])
    values = list(values)
    if all(_is_number(v) for v in values):
        keys = [float(v) for v in values]
    else:
        keys = values
    levels = sorted(set(keys))
    if len(levels) > 2:
        raise DataError("binary only")
    if set(levels) <= {0.0, 1.0}:
        return np.array(keys, dtype=float)
    return np.array([float(levels.index(k)) for k in keys])


def to_dataset(encoded: EncodedTable, name: str = "dataset") -> Dataset:
    return Dataset(
        features=encoded.matrix,
        target=encode_target(encoded.target, encoded.task),
        task=encoded.task,
        column_names=encoded.column_names,
        column_origin=encoded.column_origin,
        column_kinds=encoded.column_kinds,
        name=name,
    )


def preprocess(table: RawTable, name: str = "dataset") -> tuple[Dataset | None, PreprocessReport]:
    """Missing-value policy plus encoding. Scaling happens per split.

    Returns ``(None, report)`` when the table is rejected.
    """
    cleaned, report = apply_missing_policy(table)
    if not report.accepted:
        return None, report
    encoded = one_hot_encode(cleaned)
    report = replace(report, constant_categoricals=list(encoded.constant_categoricals))
    return to_dataset(encoded, name=name), report


def load_dataset(path, target_column: str, task: str, categorical=None, name=None):
    table = load_table(path, target_column, task, categorical=categorical)
    name = name or os.path.splitext(os.path.basename(path))[0]
    return preprocess(table, name=name)


@dataclass(frozen=True)
class ScalerParams:
    median: np.ndarray
    iqr: np.ndarray
    fitted_on: str = "train"
    scaled: np.ndarray | None = None

    @property
    def scale(self) -> np.ndarray:
        return np.where(self.iqr > 0, self.iqr, 1.0)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = (X - self.median) / self.scale
        if self.scaled is not None:
            out = np.where(self.scaled, out, X)
        return out

    def to_dict(self) -> dict:
        return {
            "median": self.median.tolist(),
            "iqr": self.iqr.tolist(),
            "fitted_on": self.fitted_on,
        }


def fit_robust_scaler(X, fit_rows, fitted_on: str = "train", mask=None) -> ScalerParams:
    """Median and IQR (linear-interpolation quartiles) over ``fit_rows`` only."""
    fit_rows = np.asarray(fit_rows, dtype=int)
    if fit_rows.size == 0:
        raise DataError("cannot fit scaler on an empty split")
    sub = np.asarray(X, dtype=float)[fit_rows]
    q1, med, q3 = np.quantile(sub, [0.25, 0.5, 0.75], axis=0, method="linear")
    iqr = np.maximum(q3 - q1, 0.0)
    return ScalerParams(med, iqr, fitted_on, None if mask is None else np.asarray(mask, bool))


def robust_scale(fit_split, ds: Dataset, scale_indicators: bool = True, fitted_on: str = "train"):
    """Fit median/IQR scaling on ``fit_split`` rows and transform all rows.

    Constant columns (IQR 0) are centred but not rescaled, so they map to 0.
    """
    mask = None
    if not scale_indicators:
        mask = np.array([k != "indicator" for k in ds.column_kinds])
    params = fit_robust_scaler(ds.features, fit_split, fitted_on=fitted_on, mask=mask)
    return params, ds.with_features(params.transform(ds.features))
