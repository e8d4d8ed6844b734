import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from tabench.data import Dataset  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def random_xy(rng, task, n=None, d=None, ties=None):
    """Small random problem; ``ties`` draws integer features so distances collide."""
    n = int(rng.integers(8, 41)) if n is None else n
    d = int(rng.integers(1, 7)) if d is None else d
    ties = bool(rng.random() < 0.4) if ties is None else ties
    X = rng.integers(0, 4, size=(n, d)).astype(float) if ties else rng.normal(size=(n, d))
    if task == "classification":
        y = (X[:, 0] + rng.normal(scale=1.0, size=n) > np.median(X[:, 0])).astype(float)
        y[0], y[1] = 0.0, 1.0
    else:
        y = X @ rng.normal(size=d) + rng.normal(scale=0.5, size=n)
        if rng.random() < 0.3:
            y = np.round(y)
    return X, y


def make_dataset(X, y, task, name="synthetic"):
    return Dataset(X, y, task, tuple(f"x{j}" for j in range(X.shape[1])), name=name)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_csv(tmp_path):
    def _write(name, header, rows):
        path = tmp_path / name
        lines = [",".join(header)] + [",".join(str(c) for c in r) for r in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)
    return _write


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
