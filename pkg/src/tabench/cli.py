"""``tabench`` command line: profile, split, bench, rank, report."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import warnings

import numpy as np

from tabench import __version__
from tabench.complexity import ComplexityProfile, metric_correlation, profile
from tabench.config import ConfigError, default_seed, load_config
from tabench.data import DataError, load_dataset, robust_scale
from tabench.evaluation import (
    CLASSIFICATION_METRICS,
    ResultTable,
    aggregate_median,
    median_scores,
    run_benchmark,
)
from tabench.models.external import PredictionFileError
from tabench.ranking import cd_diagram_data, rank_report, stratified_ranking
from tabench.splits import ShiftConfig, make_plans, plans_to_json

log = logging.getLogger("tabench")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2, 3, 4
LOWER_IS_BETTER = {"mse", "mae"}


class InputError(Exception):
    pass


def _csv_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _load(path, target, task, categorical, name=None):
    ds, report = load_dataset(path, target, task, categorical=categorical, name=name)
    if ds is None:
        raise DataError(f"{path} rejected by the missing-value policy: {report.to_json()}")
    return ds, report


def _scaled_for_profile(ds):
    return robust_scale(np.arange(ds.n_samples), ds, fitted_on="all")[1]


def _write(text: str, out: str | None):
    if out:
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_profile(args) -> int:
    ds, report = _load(args.csv, args.target, args.task, args.categorical)
    prof = profile(_scaled_for_profile(ds))
    payload = {"profile": prof.to_dict(), "preprocess": report.to_dict()}
    _write(json.dumps(payload, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_split(args) -> int:
    ds, _ = _load(args.csv, args.target, args.task, args.categorical)
    seed = default_seed() if args.seed is None else args.seed
    shift = ShiftConfig(seed=seed, alpha_mode=args.alpha_mode)
    plans = make_plans(ds, args.regime, seed, shift)
    _write(plans_to_json(plans, indent=1) + "\n", args.out)
    return EXIT_OK


def _next_dir(parent: str, prefix: str) -> str:
    os.makedirs(parent, exist_ok=True)
    n = 1
    while os.path.exists(os.path.join(parent, f"{prefix}-{n:03d}")):
        n += 1
    path = os.path.join(parent, f"{prefix}-{n:03d}")
    os.makedirs(path)
    return path


def _provenance(config) -> str:
    return f"tabench config_hash={config.config_hash()} global_seed={config.global_seed}"


def _complexity_csv(rt: ResultTable, provenance: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {provenance}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset_id", "model_id", "fold_id", "regime", "nonzero_terms", "tree_nodes", "stored_samples"])
    for r in rt:
        if r.status != "ok":
            continue
        c = r.complexity
        w.writerow([r.dataset_id, r.model_id, r.fold_id, r.regime]
                   + ["" if c.get(k) is None else c[k] for k in ("nonzero_terms", "tree_nodes", "stored_samples")])
    return buf.getvalue()


def _timings_csv(rt: ResultTable, provenance: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {provenance}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset_id", "model_id", "fold_id", "regime", "fit_seconds", "status"])
    for r in rt:
        w.writerow([r.dataset_id, r.model_id, r.fold_id, r.regime,
                    "" if r.fit_seconds is None else repr(r.fit_seconds), r.status])
    return buf.getvalue()


def run_bench(config, jobs: int = 1, out_dir: str | None = None) -> str:
    """Execute a campaign and write its artifacts into a fresh run directory."""
    datasets, profiles, preprocess = [], {}, {}
    for dc in config.datasets:
        ds, report = load_dataset(dc.path, dc.target, dc.task, categorical=dc.categorical,
                                  name=dc.dataset_id)
        preprocess[dc.dataset_id] = report.to_dict()
        if ds is None:
            log.warning("dataset %s rejected by the missing-value policy", dc.dataset_id)
            continue
        datasets.append(ds)
        profiles[ds.name] = profile(_scaled_for_profile(ds)).to_dict()
    shift = ShiftConfig(alpha_mode=config.alpha_mode)
    rt = run_benchmark(datasets, config.models, config.regime, config.global_seed,
                       config.budgets, jobs=jobs, shift=shift)

    run_dir = _next_dir(out_dir or config.output_dir, "run")
    prov = _provenance(config)
    meta = {"config_hash": config.config_hash(), "global_seed": config.global_seed,
            "tabench_version": __version__}
    inline = config.timing == "inline"
    rt.to_csv(os.path.join(run_dir, "results.csv"), timing=inline, provenance=prov)
    rt.to_json(os.path.join(run_dir, "results.json"), timing=inline, provenance=meta)
    files = {
        "complexity.csv": _complexity_csv(rt, prov),
        "profiles.json": json.dumps({"provenance": meta, "profiles": profiles}, indent=1, sort_keys=True),
        "preprocess.json": json.dumps({"provenance": meta, "datasets": preprocess}, indent=1, sort_keys=True),
        "config.toml": f"# {prov}\n" + config.to_toml(),
    }
    if not inline:
        files["timings.csv"] = _timings_csv(rt, prov)
    for name, text in files.items():
        with open(os.path.join(run_dir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return run_dir


def cmd_bench(args) -> int:
    config = load_config(args.config)
    config = config.with_overrides(
        global_seed=args.seed, regime=args.regime, trials=args.trials,
        search_seconds=args.search_seconds, final_fit_seconds=args.final_fit_seconds,
    )
    run_dir = run_bench(config, jobs=args.jobs, out_dir=args.out_dir)
    print(run_dir)
    return EXIT_OK


def _load_profiles(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    raw = data.get("profiles", data)
    return {k: ComplexityProfile.from_dict(v) for k, v in raw.items()}


def _primary_metric(rt: ResultTable) -> str:
    for r in rt:
        if r.scores is not None:
            return "f1" if r.scores.f1 is not None else "r2"
    raise InputError("results contain no scored rows")


def rank_outputs(rt: ResultTable, metric: str, profiles: dict | None = None,
                 stratify: str | None = None, bins: str = "terciles") -> dict:
    higher = metric not in LOWER_IS_BETTER
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scores = median_scores(aggregate_median(rt, metric))
    overall = rank_report(scores, higher, stratum_definition={"metric": "all", "dataset_count": len(scores)})
    out = {"metric": metric, "overall": overall.to_dict(), "cd_diagram": cd_diagram_data(overall)}
    if stratify:
        if not profiles:
            raise InputError("stratification needs profiles (--profiles)")
        values = {}
        for d in scores:
            if d not in profiles:
                raise InputError(f"no profile for dataset {d!r}")
            try:
                values[d] = profiles[d].get(stratify)
            except (KeyError, AttributeError):
                raise InputError(f"unknown or inapplicable stratification metric {stratify!r}") from None
        reports = stratified_ranking(values, scores, stratify, bins, higher)
        out["strata"] = [r.to_dict() for r in reports]
        out["strata_cd_diagrams"] = [cd_diagram_data(r) for r in reports]
    return out


def cmd_rank(args) -> int:
    rt = ResultTable.from_csv(args.results)
    metric = args.metric or _primary_metric(rt)
    profiles = None
    prof_path = args.profiles or os.path.join(os.path.dirname(os.path.abspath(args.results)), "profiles.json")
    if os.path.exists(prof_path):
        profiles = _load_profiles(prof_path)
    elif args.profiles:
        raise FileNotFoundError(f"profiles file not found: {args.profiles}")
    out = rank_outputs(rt, metric, profiles, args.stratify, args.bins)
    report = {k: v for k, v in out.items() if "cd_diagram" not in k}
    cd = {k: v for k, v in out.items() if "cd_diagram" in k}
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "rank_report.json"), "w") as fh:
            json.dump(report, fh, indent=1)
        with open(os.path.join(args.out_dir, "cd_diagram.json"), "w") as fh:
            json.dump(cd, fh, indent=1)
    else:
        json.dump({"rank_report": report, "cd_diagram": cd}, sys.stdout, indent=1)
        sys.stdout.write("\n")
    return EXIT_OK


def _read_provenance(path) -> str:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    return first[2:] if first.startswith("# ") else ""


def cmd_report(args) -> int:
    run_dir = args.run_dir
    results_path = os.path.join(run_dir, "results.csv")
    if not os.path.exists(results_path):
        raise FileNotFoundError(f"no results.csv in {run_dir}")
    rt = ResultTable.from_csv(results_path)
    profiles = _load_profiles(os.path.join(run_dir, "profiles.json"))
    metric = _primary_metric(rt)
    task = "classification" if metric in CLASSIFICATION_METRICS else "regression"
    bins = args.bins or ("halves" if task == "classification" else "terciles")
    prov = _read_provenance(results_path)
    out_dir = _next_dir(run_dir, "report")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cells = aggregate_median(rt, metric)
    buf = io.StringIO()
    buf.write(f"# {prov}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset_id", "model_id", "metric", "median", "folds_used", "folds_excluded"])
    for (d, m), cell in cells.items():
        w.writerow([d, m, metric, "" if cell.missing else repr(cell.value), cell.n_used, cell.n_excluded])
    with open(os.path.join(out_dir, "medians.csv"), "w", newline="") as fh:
        fh.write(buf.getvalue())

    task_profiles = {k: p for k, p in profiles.items() if p.task == task}
    ranking = {"provenance": prov, "overall": None, "stratified": {}}
    cd = {"provenance": prov, "overall": None, "stratified": {}}
    overall = rank_outputs(rt, metric)
    ranking["overall"], cd["overall"] = overall["overall"], overall["cd_diagram"]
    names = next(iter(task_profiles.values())).metric_names() if task_profiles else ()
    for name in names:
        res = rank_outputs(rt, metric, task_profiles, name, bins)
        ranking["stratified"][name] = res["strata"]
        cd["stratified"][name] = res["strata_cd_diagrams"]
    with open(os.path.join(out_dir, "ranking.json"), "w") as fh:
        json.dump(ranking, fh, indent=1)
    with open(os.path.join(out_dir, "cd_diagrams.json"), "w") as fh:
        json.dump(cd, fh, indent=1)
    if len(task_profiles) >= 3:
        metric_names, corr = metric_correlation(task_profiles.values(), task)
        with open(os.path.join(out_dir, "metric_correlation.json"), "w") as fh:
            json.dump({"provenance": prov, "metrics": metric_names, "spearman": corr.tolist()}, fh, indent=1)
    print(out_dir)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tabench {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{profile,split,bench,rank,report}")

    def data_args(p):
        p.add_argument("csv")
        p.add_argument("--target", required=True)
        p.add_argument("--task", required=True, choices=["clf", "regr"])
        p.add_argument("--categorical", type=_csv_list, default=None,
                       help="comma-separated columns to treat as categorical")
        p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("profile", help="complexity profile of one CSV as JSON")
    data_args(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("split", help="split plans of one CSV as JSON")
    data_args(p)
    p.add_argument("--regime", choices=["is", "oos"], default="is")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--alpha-mode", choices=["extreme", "uniform"], default="extreme")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("bench", help="run a benchmark campaign from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--regime", choices=["is", "oos"], default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--search-seconds", type=float, default=None)
    p.add_argument("--final-fit-seconds", type=float, default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("rank", help="ranks, Friedman/Nemenyi and CD data from a results CSV")
    p.add_argument("results")
    p.add_argument("--metric", default=None)
    p.add_argument("--profiles", default=None)
    p.add_argument("--stratify", default=None)
    p.add_argument("--bins", choices=["terciles", "halves"], default="terciles")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("report", help="aggregate a run directory into ranking reports")
    p.add_argument("run_dir")
    p.add_argument("--bins", choices=["terciles", "halves"], default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"tabench: error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, DataError, InputError, PredictionFileError) as exc:
        print(f"tabench: error[input]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"tabench: error[runtime]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
