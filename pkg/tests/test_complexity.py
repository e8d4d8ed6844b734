import numpy as np
import pytest
from scipy.stats import ortho_group

import oracles
from conftest import make_dataset, random_xy
from tabench.complexity import (
    ComplexityProfile,
    c1_class,
    c1_reg,
    e5,
    fisher_f1,
    l1_linearity,
    metric_correlation,
    n3,
    profile,
    s3,
    size_sparsity_metrics,
)


def test_size_metrics():
    rng = np.random.default_rng(0)
    n, d, t2, t3 = size_sparsity_metrics(rng.normal(size=(100, 10)))
    assert (n, d, t2) == (100, 10, 0.1)
    assert t3 <= t2
    c = rng.normal(size=3)
    assert size_sparsity_metrics(np.column_stack([c, c]))[3] == pytest.approx(1 / 3)


def test_flat_spectrum_needs_every_component():
    # 8 rows so that 4 centred columns can be orthogonal with equal variance
    H = np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]], float)
    X = np.vstack([H, -H])
    _, _, t2, t3 = size_sparsity_metrics(X)
    assert t3 == pytest.approx(4 / 8) == t2


def test_fisher_examples():
    X = np.array([[0.0], [1.0], [0.0], [1.0]])
    assert fisher_f1(X, [0, 0, 1, 1]) == 1.0
    assert fisher_f1([[0], [0], [1], [1]], [0, 0, 1, 1]) == 0.0
    assert fisher_f1([[0], [1], [1], [2]], [0, 0, 1, 1]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fisher_f1([[0], [1]], [1, 1])


def test_n3_examples():
    assert n3([[0], [1], [2], [3]], [0, 1, 0, 1]) == 1.0
    assert n3([[0], [0.1], [10], [10.1]], [0, 0, 1, 1]) == 0.0
    assert n3([[0], [1], [2]], [1, 1, 1]) == 0.0


def test_e5_examples():
    X = np.r_[np.zeros(6), np.full(6, 50.0)] + np.arange(12) * 0.01
    y = np.r_[np.zeros(6), np.ones(6)]
    assert e5(X, y) == 0.0
    assert e5(np.arange(7.0), np.ones(7)) == 0.0
    # point 0 on a line: neighbours 1..5 with two disagreeing
    val = e5(np.arange(6.0), [0, 1, 1, 0, 0, 0])
    assert val > 0
    with pytest.raises(ValueError):
        e5(np.arange(5.0), [0, 1, 0, 1, 0])


def test_e5_single_sample_contribution():
    y = np.array([0, 1, 1, 0, 0, 0, 0])
    X = np.array([0, 1, 2, 3, 4, 5, 100.0])
    # point 0's five neighbours are 1..5 with labels 1,1,0,0,0
    p = 0.4
    h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    assert h == pytest.approx(0.9710, abs=1e-4)
    assert oracles.e5(X.reshape(-1, 1), y) == pytest.approx(e5(X, y), abs=1e-12)


def test_c1_class_examples():
    assert c1_class([0, 1, 0, 1]) == pytest.approx(1)
    assert c1_class([1, 1, 1]) == 0
    assert c1_class([0, 0, 0, 1]) == pytest.approx(0.8113, abs=1e-4)


def test_c1_reg_examples():
    assert c1_reg([[1], [2], [3], [4]], [1, 5, 6, 9]) == pytest.approx(1)
    assert c1_reg([[1], [2], [3], [4]], [2, 1, 4, 3]) == pytest.approx(0.6)
    assert c1_reg([[1], [2], [3], [4]], [3, 3, 3, 3]) == 0


def test_l1_examples(rng):
    X = rng.normal(size=(20, 3))
    assert l1_linearity(X, X @ [1, -2, 0.5] + 4) == pytest.approx(0, abs=1e-12)
    assert l1_linearity([[-1], [0], [1]], [1, 0, 1]) == pytest.approx(4 / 9)
    assert l1_linearity(X, np.full(20, 7.0)) == pytest.approx(0, abs=1e-12)


def test_s3_examples():
    assert s3([[0], [0], [5], [5]], [1, 1, 2, 2]) == 0
    assert s3([[0], [1], [2]], [0, 1, 4]) == pytest.approx(11 / 3)
    assert s3([[0], [3]], [1, 4]) == pytest.approx(9)


def test_oracle_agreement_sample():
    rng = np.random.default_rng(3)
    for i in range(30):
        task = "classification" if i % 2 else "regression"
        X, y = random_xy(rng, task)
        if task == "classification":
            assert fisher_f1(X, y) == pytest.approx(oracles.fisher(X, y), abs=1e-10)
            assert n3(X, y) == pytest.approx(oracles.n3(X, y), abs=1e-10)
            assert e5(X, y) == pytest.approx(oracles.e5(X, y), abs=1e-10)
        else:
            assert c1_reg(X, y) == pytest.approx(oracles.c1_reg(X, y), abs=1e-10)
            assert l1_linearity(X, y) == pytest.approx(oracles.l1(X, y), abs=1e-10)
            assert s3(X, y) == pytest.approx(oracles.s3(X, y), abs=1e-10)


def test_invariances():
    rng = np.random.default_rng(4)
    for _ in range(20):
        X, y = random_xy(rng, "classification", ties=False)
        perm = rng.permutation(X.shape[1])
        Q = ortho_group.rvs(X.shape[1], random_state=rng) if X.shape[1] > 1 else np.array([[-1.0]])
        swapped = 1 - y
        for f in (fisher_f1, n3, e5):
            base = f(X, y)
            assert 0 <= base <= 1
            assert f(X, swapped) == pytest.approx(base, abs=1e-12)
        assert c1_class(swapped) == pytest.approx(c1_class(y))
        for f in (n3, e5):
            assert f(X[:, perm], y) == pytest.approx(f(X, y), abs=1e-12)
            assert f(X @ Q, y) == pytest.approx(f(X, y), abs=1e-12)
        Xr, yr = random_xy(rng, "regression", ties=False)
        A = rng.normal(size=(Xr.shape[1], Xr.shape[1])) + 3 * np.eye(Xr.shape[1])
        assert l1_linearity(Xr @ A + rng.normal(size=Xr.shape[1]), yr) == pytest.approx(
            l1_linearity(Xr, yr), abs=1e-9)
        p = rng.permutation(Xr.shape[1])
        assert s3(Xr[:, p], yr) == pytest.approx(s3(Xr, yr), abs=1e-12)
        assert 0 <= c1_reg(Xr, yr) <= 1


def test_profile_dispatch(rng):
    Xc, yc = random_xy(rng, "classification", n=20, d=3)
    pc = profile(make_dataset(Xc, yc, "classification"))
    assert pc.c1_reg is None and pc.l1 is None and pc.s3 is None
    assert None not in (pc.fisher_f1, pc.n3, pc.e5, pc.c1_class)
    Xr, yr = random_xy(rng, "regression", n=100, d=10)
    pr = profile(make_dataset(Xr, yr, "regression"))
    assert pr.fisher_f1 is None and pr.n3 is None
    assert pr.t2 == 0.1
    assert ComplexityProfile.from_dict(pr.to_dict()) == pr
    with pytest.raises(KeyError):
        pr.get("n3")


def _profile(t2, n):
    return ComplexityProfile("regression", n, 1, t2, t2 / 2, c1_reg=0.5, l1=0.1, s3=0.1)


def test_metric_correlation():
    profs = [_profile(0.1, 30), _profile(0.2, 20), _profile(0.3, 10)]
    names, m = metric_correlation(profs, metrics=["t2", "n_samples", "t3", "t2"])
    assert np.all(np.diag(m) == 1)
    assert m[0, 1] == pytest.approx(-1)
    assert m[0, 3] == pytest.approx(1)
    np.testing.assert_allclose(m, m.T)
    with pytest.raises(ValueError):
        metric_correlation(profs[:2])
