"""Plug-in boundary for learners that run outside this package.

A predictions CSV has the exact header ``dataset_id,fold_id,row_index,prediction``
with an optional trailing ``fit_seconds`` column.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

REQUIRED_COLUMNS = ["dataset_id", "fold_id", "row_index", "prediction"]


class PredictionFileError(ValueError):
    pass


@dataclass
class ExternalPredictions:
    predictions: dict = field(default_factory=dict)
    fit_seconds: dict = field(default_factory=dict)
    source: str = ""

    def for_fold(self, dataset_id: str, fold_id: int, rows) -> np.ndarray:
        """Predictions for ``rows`` in order; raises listing every missing key."""
        missing = [(dataset_id, fold_id, int(r)) for r in rows
                   if (dataset_id, int(fold_id), int(r)) not in self.predictions]
        if missing:
            shown = ", ".join(f"({d}, {f}, {r})" for d, f, r in missing[:20])
            more = f" and {len(missing) - 20} more" if len(missing) > 20 else ""
            raise PredictionFileError(f"missing predictions for {shown}{more}")
        return np.array([self.predictions[(dataset_id, int(fold_id), int(r))] for r in rows])

    def seconds_for(self, dataset_id: str, fold_id: int) -> float:
        return self.fit_seconds.get((dataset_id, int(fold_id)), 0.0)


def external_predictions_load(path) -> ExternalPredictions:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header[:4] != REQUIRED_COLUMNS or header[4:] not in ([], ["fit_seconds"]):
            raise PredictionFileError(
                f"{path}: header must be {','.join(REQUIRED_COLUMNS)}[,fit_seconds], got {','.join(header)}"
            )
        out = ExternalPredictions(source=str(path))
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                key = (row[0], int(row[1]), int(row[2]))
                value = float(row[3])
                seconds = float(row[4]) if len(header) > 4 and row[4] != "" else None
            except (IndexError, ValueError) as exc:
                raise PredictionFileError(f"{path}:{lineno}: malformed row ({exc})") from None
            if key in out.predictions:
                raise PredictionFileError(f"duplicate prediction for {key} at line {lineno}")
            out.predictions[key] = value
            if seconds is not None:
                out.fit_seconds[key[:2]] = seconds
    return out
