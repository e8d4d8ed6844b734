"""Campaign configuration read from TOML.

Example::

    global_seed = 7
    regime = "is"
    output_dir = "runs"

    [budgets]
    trials = 50
    search_seconds = 6000
    final_fit_seconds = 300

    [[datasets]]
    path = "data/housing.csv"
    target = "price"
    task = "regr"

    [[models]]
    family = "lasso"

    [[models]]
    family = "poly_lasso"
    space = { degree = [2] }
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from tabench.data import DataError, normalize_task
from tabench.evaluation import Budgets
from tabench.models import ModelSpec

SEED_ENV = "TABENCH_SEED"
REGIMES = ("is", "oos")
TIMING_MODES = ("separate", "inline")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    path: str
    target: str
    task: str
    id: str = ""
    categorical: tuple = ()

    @property
    def dataset_id(self) -> str:
        return self.id or os.path.splitext(os.path.basename(self.path))[0]


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple
    models: tuple
    regime: str = "is"
    global_seed: int = 0
    budgets: Budgets = field(default_factory=Budgets)
    output_dir: str = "runs"
    timing: str = "separate"
    alpha_mode: str = "extreme"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.timing not in TIMING_MODES:
            raise ConfigError(f"timing must be one of {TIMING_MODES}")
        if not self.datasets:
            raise ConfigError("config lists no datasets")
        if not self.models:
            raise ConfigError("config lists no models")
        ids = [d.dataset_id for d in self.datasets]
        if len(set(ids)) != len(ids):
            raise ConfigError("dataset ids must be unique")
        mids = [m.model_id for m in self.models]
        if len(set(mids)) != len(mids):
            raise ConfigError("model ids must be unique")

    def campaign_dict(self) -> dict:
        """Everything that determines results; excludes where outputs go."""
        return {
            "datasets": [asdict(d) for d in self.datasets],
            "models": [m.to_dict() for m in self.models],
            "regime": self.regime,
            "global_seed": self.global_seed,
            "budgets": asdict(self.budgets),
            "timing": self.timing,
            "alpha_mode": self.alpha_mode,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.campaign_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def to_toml(self) -> str:
        return _dump_toml({**self.campaign_dict(), "output_dir": self.output_dir})

    def with_overrides(self, **kwargs) -> "RunConfig":
        budgets = {k: kwargs.pop(k) for k in ("trials", "search_seconds", "final_fit_seconds")
                   if kwargs.get(k) is not None}
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        if budgets:
            kwargs["budgets"] = replace(self.budgets, **budgets)
        return replace(self, **kwargs)


def default_seed() -> int:
    value = os.environ.get(SEED_ENV)
    if value is None:
        return 0
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {value!r}") from None


def _model_spec(entry: dict, base_dir: str) -> ModelSpec:
    entry = dict(entry)
    family = entry.pop("family", None)
    if family is None:
        raise ConfigError("model entry without 'family'")
    predictions = entry.pop("predictions", None)
    if predictions is not None:
        predictions = os.path.normpath(os.path.join(base_dir, predictions))
    spec = ModelSpec(
        family=family,
        model_id=entry.pop("id", ""),
        hyperparameters=dict(entry.pop("hyperparameters", {})),
        space_overrides={k: list(v) for k, v in entry.pop("space", {}).items()},
        predictions=predictions,
    )
    if entry:
        raise ConfigError(f"unknown keys in model entry: {sorted(entry)}")
    return spec


def config_from_dict(raw: dict, base_dir: str = ".") -> RunConfig:
    raw = dict(raw)
    try:
        datasets = []
        for d in raw.pop("datasets", []):
            d = dict(d)
            path = os.path.normpath(os.path.join(base_dir, d.pop("path")))
            datasets.append(DatasetConfig(
                path=path, target=d.pop("target"), task=normalize_task(d.pop("task")),
                id=d.pop("id", ""), categorical=tuple(d.pop("categorical", ())),
            ))
            if d:
                raise ConfigError(f"unknown keys in dataset entry: {sorted(d)}")
        models = tuple(_model_spec(m, base_dir) for m in raw.pop("models", []))
        budgets = Budgets(**raw.pop("budgets", {}))
        seed = raw.pop("global_seed", None)
        config = RunConfig(
            datasets=tuple(datasets),
            models=models,
            regime=raw.pop("regime", "is"),
            global_seed=default_seed() if seed is None else int(seed),
            budgets=budgets,
            output_dir=os.path.normpath(os.path.join(base_dir, raw.pop("output_dir", "runs"))),
            timing=raw.pop("timing", "separate"),
            alpha_mode=raw.pop("alpha_mode", "extreme"),
        )
    except (KeyError, TypeError, DataError) as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    if raw:
        raise ConfigError(f"unknown top-level keys: {sorted(raw)}")
    return config


def load_config(path) -> RunConfig:
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, os.path.dirname(os.path.abspath(path)))


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{ " + ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items()) + " }"
    raise TypeError(type(v).__name__)


def _dump_toml(d: dict) -> str:
    """Minimal writer for the flat shape of a resolved RunConfig."""
    lines = []
    for key in ("global_seed", "regime", "timing", "alpha_mode", "output_dir"):
        lines.append(f"{key} = {_toml_value(d[key])}")
    lines.append("\n[budgets]")
    for k, v in d["budgets"].items():
        lines.append(f"{k} = {_toml_value(v)}")
    for ds in d["datasets"]:
        lines.append("\n[[datasets]]")
        for k in ("path", "target", "task", "id", "categorical"):
            lines.append(f"{k} = {_toml_value(list(ds[k]) if k == 'categorical' else ds[k])}")
    for m in d["models"]:
        lines.append("\n[[models]]")
        lines.append(f"family = {_toml_value(m['family'])}")
        lines.append(f"id = {_toml_value(m['model_id'])}")
        if m["predictions"]:
            lines.append(f"predictions = {_toml_value(m['predictions'])}")
        if m["hyperparameters"]:
            lines.append(f"hyperparameters = {_toml_value(m['hyperparameters'])}")
        if m["space_overrides"]:
            lines.append(f"space = {_toml_value(m['space_overrides'])}")
    return "\n".join(lines) + "\n"
