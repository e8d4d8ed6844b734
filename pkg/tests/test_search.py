import math

import numpy as np
import pytest
from scipy.stats import kstest

from tabench.models.search import Param, RandomSampler, SearchFailed, random_search


def test_single_trial_returns_its_sample():
    space = [Param("a", "real", 0, 1)]
    res = random_search(space, lambda p: p["a"], trials=1, seed=3)
    assert res.best_params == RandomSampler().sample(space, 0, 3)
    assert len(res.trials) == 1


def test_constant_objective_first_trial_wins():
    res = random_search([Param("a", "real", 0, 1)], lambda p: 1.0, trials=10)
    assert res.best_trial == 0


def test_best_is_argmax():
    res = random_search([Param("a", "real", -1, 1)], lambda p: -p["a"] ** 2, trials=30, seed=1)
    scores = [t.score for t in res.trials]
    assert res.best_score == max(scores)
    assert res.best_trial == scores.index(max(scores))


def test_log_scale_uniform_in_log_space():
    p = Param("alpha", "real", 1e-4, 1e2, "log")
    rng = np.random.default_rng(0)
    draws = np.array([p.sample(rng) for _ in range(10_000)])
    assert draws.min() >= 1e-4 and draws.max() <= 1e2
    u = (np.log10(draws) + 4) / 6
    assert kstest(u, "uniform").pvalue > 0.01


def test_int_and_categorical():
    rng = np.random.default_rng(1)
    p = Param("k", "int", 3, 5)
    assert {p.sample(rng) for _ in range(200)} == {3, 4, 5}
    c = Param("c", "categorical", choices=("gini", "entropy"))
    assert {c.sample(rng) for _ in range(100)} == {"gini", "entropy"}
    assert c.contains("gini") and not p.contains(6)


def test_failed_trials_are_logged():
    def objective(p):
        if p["a"] > 0.5:
            raise RuntimeError("boom")
        return p["a"]
    res = random_search([Param("a", "real", 0, 1)], objective, trials=20, seed=2)
    failed = [t for t in res.trials if t.status == "failed"]
    assert failed and all("boom" in t.error for t in failed)
    assert res.best_score <= 0.5


def test_all_failed_raises():
    with pytest.raises(SearchFailed):
        random_search([Param("a", "real", 0, 1)], lambda p: 1 / 0, trials=3)


def test_nan_counts_as_failure():
    res = random_search([Param("a", "real", 0, 1)], lambda p: math.nan if p["a"] < 0.5 else p["a"], trials=10)
    assert all(t.status == "failed" for t in res.trials if t.params["a"] < 0.5)


def test_time_budget_stops_search():
    import time

    def slow(p):
        time.sleep(0.05)
        return 0.0
    res = random_search([Param("a", "real", 0, 1)], slow, trials=50, time_budget_s=0.12)
    assert 1 < len(res.trials) < 10


def test_trial_samples_depend_only_on_seed_and_index():
    space = [Param("a", "real", 0, 1), Param("b", "int", 1, 9)]
    a = random_search(space, lambda p: 0, trials=5, seed=9)
    b = random_search(space, lambda p: 0, trials=3, seed=9)
    assert [t.params for t in a.trials[:3]] == [t.params for t in b.trials]


def test_param_validation():
    with pytest.raises(ValueError):
        Param("a", "real", 2, 1)
    with pytest.raises(ValueError):
        Param("a", "real", 0, 1, "log")
    with pytest.raises(ValueError):
        Param("a", "categorical")
    with pytest.raises(ValueError):
        random_search([], lambda p: 0)
