"""Acceptance criteria 1-9.

Each test records a one-line PASS/FAIL verdict (shown in the pytest terminal
summary) before asserting, so a failing criterion is still reported.
"""
import os
import time
import warnings

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES, make_dataset, random_xy
from tabench.cli import main
from tabench.complexity import c1_class, c1_reg, e5, fisher_f1, l1_linearity, n3, s3, size_sparsity_metrics
from tabench.evaluation import Budgets, aggregate_median, median_scores, run_benchmark
from tabench.models import FAMILIES, ModelSpec, gnb_fit, register_family, tree_fit
from tabench.models.base import FittedModel
from tabench.models.linear import lasso_coordinate_descent, soft_threshold
from tabench.models.logistic import logistic_loss_grad
from tabench.ranking import friedman_test, nemenyi_cd, rank_report
from tabench.splits import ShiftConfig, oos_classification, oos_regression

CLASS_METRICS = {"f1": fisher_f1, "n3": n3, "e5": e5}
REGR_METRICS = {"c1_reg": c1_reg, "l1": l1_linearity, "s3": s3}


def _verdict(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _all_metrics(X, y, task):
    _, _, t2, t3 = size_sparsity_metrics(X)
    out = {"t2": t2, "t3": t3}
    if task == "classification":
        out.update({k: f(X, y) for k, f in CLASS_METRICS.items()})
        out["c1_class"] = c1_class(y)
    else:
        out.update({k: f(X, y) for k, f in REGR_METRICS.items()})
    return out


def test_criterion_1_complexity_oracle_equivalence():
    rng = np.random.default_rng(101)
    oracle = {"t2": lambda X, y: oracles.t2(X), "t3": lambda X, y: oracles.t3(X), "f1": oracles.fisher,
              "n3": oracles.n3, "e5": oracles.e5, "c1_class": lambda X, y: oracles.c1_class(y),
              "c1_reg": oracles.c1_reg, "l1": oracles.l1, "s3": oracles.s3}
    start = time.perf_counter()
    worst, checked = 0.0, 0
    for i in range(200):
        task = "classification" if i % 2 else "regression"
        X, y = random_xy(rng, task)
        for name, value in _all_metrics(X, y, task).items():
            worst = max(worst, abs(value - oracle[name](X, y)))
            checked += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 30
    _verdict(1, ok, f"{checked} metric values on 200 datasets, max abs deviation {worst:.2e}, {elapsed:.1f} s")


def test_criterion_2_ranges_and_invariances():
    rng = np.random.default_rng(202)
    failures = []
    checks = 0
    for i in range(200):
        task = "classification" if i % 2 else "regression"
        X, y = random_xy(rng, task)
        base = _all_metrics(X, y, task)
        for name in ("f1", "n3", "e5", "c1_class", "c1_reg"):
            if name in base:
                checks += 1
                if not 0 <= base[name] <= 1:
                    failures.append((i, name, "range", base[name]))
        perm = rng.permutation(X.shape[1])
        for name, value in _all_metrics(X[:, perm], y, task).items():
            checks += 1
            if abs(value - base[name]) > 1e-12:
                failures.append((i, name, "feature permutation", value - base[name]))
        if task == "classification":
            for name, value in _all_metrics(X, 1 - y, task).items():
                checks += 1
                if abs(value - base[name]) > 1e-12:
                    failures.append((i, name, "label swap", value - base[name]))
    _verdict(2, not failures, f"{checks} checks on 200 datasets, {len(failures)} failures {failures[:3]}")


def _shifted_dataset(rng):
    n = int(rng.integers(16, 401))
    minority = int(rng.integers(4, n // 2 + 1))
    n_pos = minority if rng.random() < 0.5 else n - minority
    y = np.zeros(n)
    y[rng.choice(n, n_pos, replace=False)] = 1
    return make_dataset(rng.normal(size=(n, 2)), y, "classification")


def _quartile_oracle(y):
    e1, e2, e3 = np.quantile(y, [0.25, 0.5, 0.75])
    return np.where(y <= e1, 0, np.where(y <= e2, 1, np.where(y <= e3, 2, 3)))


def test_criterion_3_oos_shift_contract():
    rng = np.random.default_rng(303)
    cfg = ShiftConfig(f=0.25, l=0.125, u=0.5)
    failures = []
    start = time.perf_counter()
    for i in range(500):
        ds = _shifted_dataset(rng)
        y = ds.target
        n = y.size
        a_d = y.mean()
        plans = oos_classification(ds, ShiftConfig(cfg.f, cfg.l, cfg.u, seed=i))
        for p in plans:
            test = np.array(p.test)
            slack = 1 / test.size
            rate = y[test].mean()
            problems = []
            if test.size != int(np.floor(cfg.f * n + 0.5)):
                problems.append("test size")
            if not (cfg.l / cfg.f * a_d - slack <= rate <= cfg.u / cfg.f * a_d + slack):
                problems.append("interval")
            if (a_d <= 0.5 and rate < a_d) or (a_d > 0.5 and rate > a_d):
                problems.append("direction")
            if set(y[list(p.train)]) != {0.0, 1.0}:
                problems.append("train lacks a class")
            if problems:
                failures.append((i, p.fold_id, problems, n, a_d, rate))

        yr = rng.normal(size=n) if i % 3 else np.round(rng.normal(size=n), 1)
        plans = oos_regression(make_dataset(rng.normal(size=(n, 2)), yr, "regression"))
        tests = [set(p.test) for p in plans]
        quart = _quartile_oracle(yr)
        if sum(map(len, tests)) != n or set().union(*tests) != set(range(n)):
            failures.append((i, "regression partition"))
        if sorted(p.shift_detail["excluded_quartile"] for p in plans) != [1, 2, 3, 4]:
            failures.append((i, "quartile labels"))
        for p in plans:
            q = p.shift_detail["excluded_quartile"] - 1
            if set(p.test) != set(np.flatnonzero(quart == q)) or set(p.train_validation) & set(p.test):
                failures.append((i, "quartile", q))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    _verdict(3, ok, f"500 classification and 500 regression datasets, {len(failures)} violations "
                    f"{failures[:3]}, {elapsed:.1f} s")


def test_criterion_4_learner_correctness():
    rng = np.random.default_rng(404)
    lasso_err = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 60))
        x = rng.normal(size=n) * rng.uniform(0.1, 5)
        y = rng.normal() * x + rng.normal(size=n)
        alpha = float(rng.uniform(0, 3))
        xc, yc = x - x.mean(), y - y.mean()
        expected = soft_threshold(xc @ yc / n, alpha) / (xc @ xc / n)
        coef, _, _ = lasso_coordinate_descent(x.reshape(-1, 1), y, alpha)
        lasso_err = max(lasso_err, abs(coef[0] - expected))

    grad_err = 0.0
    for _ in range(200):
        n, d = int(rng.integers(5, 40)), int(rng.integers(1, 6))
        X = rng.normal(size=(n, d))
        y = (rng.random(n) < 0.5).astype(float)
        C = [None, 0.1, 1.0, 10.0][int(rng.integers(4))]
        w = rng.normal(size=d + 1)
        _, g = logistic_loss_grad(w, X, y, C)
        h = 1e-6
        fd = np.array([(logistic_loss_grad(w + h * e, X, y, C)[0] - logistic_loss_grad(w - h * e, X, y, C)[0])
                       / (2 * h) for e in np.eye(d + 1)])
        grad_err = max(grad_err, np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-3))

    tree_mismatch = trees = 0
    for n in range(2, 13):
        for d in (1, 2, 3):
            for rep in range(6):
                X = rng.integers(0, 4, (n, d)).astype(float) if rep % 2 else rng.normal(size=(n, d)).round(1)
                yc = rng.integers(0, 2, n).astype(float)
                yr = rng.integers(0, 5, n).astype(float)
                for task, y, crit in (("classification", yc, "gini"), ("classification", yc, "entropy"),
                                      ("regression", yr, "mse")):
                    for depth, leaf in ((1, 1), (2, 1), (3, 2), (6, 1)):
                        m = tree_fit(X, y, task, crit, depth, leaf)
                        trees += 1
                        if not oracles.same_tree(oracles.tree_as_tuple(m.root_), oracles.cart(X, y, crit, depth, leaf)):
                            tree_mismatch += 1

    m = gnb_fit(np.array([[-1.0], [1.0], [1.0], [3.0]]), np.array([0, 0, 1, 1.0]), var_smoothing=0.0)
    jll = m.joint_log_likelihood([[1.0]])[0]
    gnb_gap = abs(jll[0] - jll[1])
    gnb_sides = m.predict([[1.0 - 1e-6]])[0] == 0 and m.predict([[1.0 + 1e-6]])[0] == 1

    ok = lasso_err <= 1e-8 and grad_err < 1e-5 and tree_mismatch == 0 and gnb_gap <= 1e-9 and gnb_sides
    _verdict(4, ok, f"lasso max err {lasso_err:.1e}, logistic grad rel err {grad_err:.1e}, "
                    f"CART {trees - tree_mismatch}/{trees} match, GNB boundary gap {gnb_gap:.1e}")


def _random_rank_matrix(rng, n, k):
    if rng.random() < 0.3:
        scores = rng.integers(0, 3, size=(n, k)).astype(float)
    else:
        scores = rng.random((n, k))
    # average ranks within each row, rank 1 for the smallest score
    return np.array([[(row < v).sum() + ((row == v).sum() + 1) / 2 for v in row] for row in scores])


def test_criterion_5_statistics():
    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(20):
        n, k = int(rng.integers(2, 9)), int(rng.integers(2, 6))
        R = _random_rank_matrix(rng, n, k)
        p_oracle = oracles.friedman_permutation_p(R, 100_000, rng)
        worst = max(worst, abs(friedman_test(R)[1] - p_oracle))
    cd = nemenyi_cd(2, 10, 0.05)
    tie_stat, tie_p = friedman_test(np.full((6, 4), 2.5))
    ok = worst <= 0.03 and abs(cd - 0.6198) <= 1e-3 and tie_stat == 0
    _verdict(5, ok, f"Friedman p max deviation {worst:.4f} on 20 matrices, Nemenyi CD {cd:.4f}, "
                    f"all-ties statistic {tie_stat}")


@pytest.mark.slow
def test_criterion_6_sparsity_direction():
    rng = np.random.default_rng(606)
    datasets = []
    for i in range(10):
        X = rng.normal(size=(200, 20))
        beta = np.zeros(20)
        active = rng.choice(20, 5, replace=False)
        beta[active] = rng.uniform(1, 3, 5) * rng.choice([-1, 1], 5)
        datasets.append(make_dataset(X, X @ beta + 0.1 * rng.normal(size=200), "regression", f"sparse{i:02d}"))
    start = time.perf_counter()
    rt = run_benchmark(datasets, [ModelSpec("linear"), ModelSpec("lasso"), ModelSpec("poly_lasso")], "is", 7,
                       Budgets(trials=10))
    elapsed = time.perf_counter() - start
    terms = {}
    for row in rt:
        if row.status == "ok":
            terms.setdefault(row.model_id, []).append(row.complexity["nonzero_terms"])
    med = {m: float(np.median(v)) for m, v in terms.items()}
    ok = med["lasso"] < med["linear"] and med["poly_lasso"] > med["lasso"] and elapsed < 300
    _verdict(6, ok, f"median nonzero terms OLS {med['linear']:g}, LASSO {med['lasso']:g}, "
                    f"PR+LASSO {med['poly_lasso']:g}, {elapsed:.0f} s")


@pytest.mark.slow
def test_criterion_7_linearity_stratification():
    rng = np.random.default_rng(707)
    groups = {"linear": [], "nonlinear": []}
    for i in range(8):
        for g in groups:
            X = rng.uniform(-2, 2, size=(150, 4))
            c = rng.uniform(0.5, 2, size=4) * rng.choice([-1, 1], 4)
            if g == "linear":
                y = X @ c
            else:
                y = c[0] * X[:, 0] * X[:, 1] + c[1] * np.sin(2 * X[:, 2]) + c[2] * X[:, 3] ** 2 + 0.3 * c[3] * X[:, 0]
            groups[g].append(make_dataset(X, y + 0.1 * rng.normal(size=150), "regression", f"{g}{i}"))
    specs = [ModelSpec(m) for m in ("linear", "lasso", "poly_lasso", "tree_regr", "knn_regr")]
    start = time.perf_counter()
    ranks = {}
    for g, dss in groups.items():
        rt = run_benchmark(dss, specs, "is", 3, Budgets(trials=10))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ranks[g] = rank_report(median_scores(aggregate_median(rt, "r2"))).average_ranks
    elapsed = time.perf_counter() - start
    gap = {g: r["poly_lasso"] - r["linear"] for g, r in ranks.items()}
    ok = gap["nonlinear"] < 0 and gap["nonlinear"] < gap["linear"] and elapsed < 600
    _verdict(7, ok, f"avg rank PR+LASSO/OLS linear {ranks['linear']['poly_lasso']:.3g}/{ranks['linear']['linear']:.3g}, "
                    f"non-linear {ranks['nonlinear']['poly_lasso']:.3g}/{ranks['nonlinear']['linear']:.3g}, "
                    f"{elapsed:.0f} s")


def _write_csv(path, X, y, labels=None):
    with open(path, "w") as fh:
        fh.write(",".join(f"x{j}" for j in range(X.shape[1])) + ",target\n")
        for row, t in zip(X, y):
            fh.write(",".join(repr(float(v)) for v in row) + f",{t if labels is None else labels[int(t)]}\n")
    return str(path)


def test_criterion_8_byte_identical_results(tmp_path, capsys):
    rng = np.random.default_rng(808)
    X = rng.normal(size=(60, 3))
    reg = _write_csv(tmp_path / "reg.csv", X, X @ [1.0, -1.0, 0.5] + 0.2 * rng.normal(size=60))
    clf = _write_csv(tmp_path / "clf.csv", X, (X[:, 0] + 0.5 * rng.normal(size=60) > 0.3).astype(int), ["no", "yes"])
    same = []
    for regime in ("is", "oos"):
        cfg = tmp_path / f"{regime}.toml"
        cfg.write_text("\n".join([
            "global_seed = 8", f'regime = "{regime}"', f'output_dir = "{tmp_path / regime}"',
            "[budgets]", "trials = 4",
            "[[datasets]]", f'path = "{reg}"', 'target = "target"', 'task = "regr"',
            "[[datasets]]", f'path = "{clf}"', 'target = "target"', 'task = "clf"',
            *[f'[[models]]\nfamily = "{f}"' for f in ("linear", "lasso", "poly_lasso", "logistic", "tree_clf",
                                                        "tree_regr", "knn_clf", "knn_regr", "gnb")],
        ]) + "\n")
        outputs = []
        for jobs in ("1", "1", "3"):
            assert main(["bench", "--config", str(cfg), "--jobs", jobs]) == 0
            run_dir = capsys.readouterr().out.strip()
            outputs.append(open(os.path.join(run_dir, "results.csv"), "rb").read())
        same.append(outputs[0] == outputs[1] == outputs[2])
    _verdict(8, all(same), f"results.csv identical across repeat and --jobs 1/3 runs: in-sample {same[0]}, "
                           f"out-of-sample {same[1]}")


class _SleepyModel(FittedModel):
    """Mean predictor that stalls whenever the marker row is missing from its training data."""

    def __init__(self, seconds):
        self.seconds = seconds

    def _fit(self, X, y, deadline):
        if np.ptp(X[:, -1]) == 0:
            time.sleep(self.seconds)
        self.mean_ = float(np.mean(y))

    def predict(self, X):
        return np.full(len(X), self.mean_)


def test_criterion_9_timeout_excluded_from_median():
    budget = 300 / 100  # 300 s scaled to 3 s
    rng = np.random.default_rng(909)
    X = rng.normal(size=(40, 2))
    marker = np.zeros((40, 1))
    marker[0] = 1.0
    ds = make_dataset(np.hstack([X, marker]), X @ [1.0, 2.0] + rng.normal(size=40), "regression", "stall")
    register_family("sleepy_stub", lambda task, params: _SleepyModel(budget + 0.5))
    try:
        rt = run_benchmark([ds], [ModelSpec("sleepy_stub")], "is", 0, Budgets(final_fit_seconds=budget), jobs=4)
    finally:
        FAMILIES.pop("sleepy_stub")
    statuses = sorted(r.status for r in rt)
    timed_out = [r for r in rt if r.status == "timeout"]
    ok_values = [r.scores.r2 for r in rt if r.status == "ok"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cell = aggregate_median(rt, "r2")[("stall", "sleepy_stub")]
    csv_text = rt.to_csv(timing=False)
    ok = (statuses == ["ok", "ok", "ok", "timeout"]
          and all(r.scores is None for r in timed_out)
          and cell.n_excluded == 1 and cell.n_used == 3
          and cell.value == pytest.approx(float(np.median(ok_values)))
          and csv_text.count(",timeout") == 1)
    _verdict(9, ok, f"fold statuses {statuses}, median over {cell.n_used} folds with {cell.n_excluded} excluded")
