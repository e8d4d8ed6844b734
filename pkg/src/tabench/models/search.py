"""Budgeted random hyperparameter search."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 50
DEFAULT_TIME_BUDGET_S = 6000.0


@dataclass(frozen=True)
class Param:
    """One tunable hyperparameter.

    ``kind`` is ``int``, ``real`` or ``categorical``; ``scale`` is ``linear``
    or ``log`` (log-uniform sampling).
    """

    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    scale: str = "linear"
    choices: tuple = ()

    def __post_init__(self):
        if self.kind not in ("int", "real", "categorical"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.choices:
                raise ValueError(f"{self.name}: categorical parameter without choices")
            return
        if self.low is None or self.high is None or self.low > self.high:
            raise ValueError(f"{self.name}: invalid range [{self.low}, {self.high}]")
        if self.scale == "log" and self.low <= 0:
            raise ValueError(f"{self.name}: log scale needs a positive lower bound")

    def sample(self, rng: np.random.Generator):
        if self.kind == "categorical":
            return self.choices[int(rng.integers(len(self.choices)))]
        if self.scale == "log":
            value = 10.0 ** rng.uniform(math.log10(self.low), math.log10(self.high))
            value = min(max(value, self.low), self.high)
        else:
            value = rng.uniform(self.low, self.high)
        if self.kind == "int":
            if self.scale == "linear":
                return int(rng.integers(int(self.low), int(self.high) + 1))
            return int(min(max(round(value), self.low), self.high))
        return float(value)

    def contains(self, value) -> bool:
        if self.kind == "categorical":
            return value in self.choices
        return self.low <= value <= self.high

    def to_dict(self) -> dict:
        if self.kind == "categorical":
            return {"name": self.name, "kind": self.kind, "choices": list(self.choices)}
        return {"name": self.name, "kind": self.kind, "low": self.low, "high": self.high,
                "scale": self.scale}


class Sampler(Protocol):
    def sample(self, space, trial_index: int, seed: int, history) -> dict: ...


class RandomSampler:
    """Independent draws per parameter; trial i depends only on (seed, i)."""

    def sample(self, space, trial_index: int, seed: int, history=()) -> dict:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, trial_index]))
        return {p.name: p.sample(rng) for p in space}


@dataclass
class Trial:
    index: int
    params: dict
    score: float | None = None
    status: str = "ok"
    error: str = ""
    seconds: float = 0.0


@dataclass
class SearchResult:
    best_params: dict
    best_score: float
    best_trial: int
    trials: list[Trial] = field(default_factory=list)


class SearchFailed(RuntimeError):
    pass


def random_search(space, objective: Callable[[dict], float], trials: int = DEFAULT_TRIALS,
                  time_budget_s: float = DEFAULT_TIME_BUDGET_S, seed: int = 0,
                  sampler: Sampler | None = None) -> SearchResult:
    """Maximize ``objective`` over sampled configurations.

    Stops after ``trials`` evaluations or once ``time_budget_s`` has elapsed
    (checked before each new trial). A trial whose objective raises is logged
    as failed. The best score wins, the earliest trial on ties.
    """
    space = list(space)
    if not space:
        raise ValueError("empty search space")
    if not 1 <= trials:
        raise ValueError("need at least one trial")
    sampler = sampler or RandomSampler()
    start = time.monotonic()
    log_: list[Trial] = []
    best = None
    for i in range(trials):
        if i > 0 and time.monotonic() - start > time_budget_s:
            log.info("search budget of %.0f s used after %d trials", time_budget_s, i)
            break
        params = sampler.sample(space, i, seed, log_)
        t0 = time.monotonic()
        trial = Trial(i, params)
        try:
            score = float(objective(params))
            if math.isnan(score):
                raise ValueError("objective returned NaN")
            trial.score = score
        except Exception as exc:  # noqa: BLE001 - any learner failure only sinks this trial
            trial.status, trial.error = "failed", f"{type(exc).__name__}: {exc}"
        trial.seconds = time.monotonic() - t0
        log_.append(trial)
        if trial.status == "ok" and (best is None or trial.score > best.score):
            best = trial
    if best is None:
        raise SearchFailed(f"all {len(log_)} trials failed; last error: {log_[-1].error}")
    return SearchResult(best.params, best.score, best.index, log_)
