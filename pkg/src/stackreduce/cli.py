"""Command line front end: synth, train, evaluate, explain, reduce, bench,
predict. Exit codes: 0 ok, 2 usage, 3 data error, 4 model/archive error."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import data as data_mod
from .ensemble import SuperLearnerModel, SuperLearnerSpec, fit_super
from .exceptions import ArchiveError, ConfigError, DataError
from .explain import (global_mean_abs_shap, kernel_shap, lime_explain, morris_for_dataset,
                      pdp_curve, prediction_function, write_report)
from .metrics import crossval_evaluate
from .reduce import ReductionPlan, plan_reduction, retrain_reduced
from .runtime import bench_inference, load_model, save_model

log = logging.getLogger("stackreduce")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 2, 3, 4


# ------------------------------------------------------------------ helpers


@dataclass(frozen=True)
class _Table:
    """Feature rows plus schema, for commands that need no targets."""

    schema: data_mod.FeatureSchema
    X: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _raw_schema(schema: data_mod.FeatureSchema) -> data_mod.FeatureSchema:
    """Schema of the unwindowed file a windowed model was trained from."""
    w = schema.window
    suffix = f"_lag{w}"
    block = schema.names[:len(schema.names) // w]
    names = tuple(n[:-len(suffix)] for n in block)[:-1]
    cats = {j: lv for j, lv in schema.categories.items() if j < len(names)}
    return data_mod.FeatureSchema(names=names, categories=cats, score_range=data_mod.SCORE_RANGE,
                                  score_name=schema.score_name)


def _load_training(path, task: str, window: int | None) -> data_mod.Dataset:
    ds = data_mod.load_csv(path)
    ds.target(task)
    if window:
        if task != "regress":
            raise ConfigError("--window applies to the regress task only")
        ds = data_mod.window_dataset(ds, window)
    return ds


def _load_for_model(path, model: SuperLearnerModel, need_target: bool):
    schema = model.schema
    if schema.window:
        raw = data_mod.load_csv(path, schema=_raw_schema(schema))
        return data_mod.window_dataset(raw, schema.window)
    if need_target:
        ds = data_mod.load_csv(path, schema=schema)
        ds.target(model.task)
        return ds
    return _Table(schema, data_mod.load_features(path, schema))


def _model(path) -> SuperLearnerModel:
    return load_model(path)


def _spec_from_config(path, task: str | None, seed: int | None,
                      window: int | None = None) -> SuperLearnerSpec:
    payload = {}
    if path:
        try:
            payload = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if task:
        payload["task"] = task
        for b in payload.get("base_specs", []):
            b["task"] = task
        if "meta_spec" in payload:
            payload.pop("meta_spec")
    if seed is not None:
        payload["seed"] = seed
    if window:
        # overlapping windows leak across shuffled inner folds
        payload.setdefault("fold_scheme", "blocked")
    return SuperLearnerSpec.from_dict(payload)


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ----------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    spec = data_mod.SyntheticSpec.from_file(args.spec)
    if args.seed is not None:
        spec = data_mod.SyntheticSpec(**{**spec.__dict__, "seed": args.seed})
    ds = data_mod.generate_planted(spec)
    data_mod.write_csv(ds, args.out)
    log.info("wrote %d rows x %d features to %s", ds.n, ds.d, args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    if args.plan:
        plan = ReductionPlan.load(args.plan)
        if args.config:
            spec = _spec_from_config(args.config, args.task, args.seed, args.window)
        elif plan.reduced_spec is None:
            raise ConfigError("plan has no reduced spec and no --config was given")
        else:
            spec = plan.reduced_spec
            if args.seed is not None:
                spec = replace(spec, seed=args.seed)
        ds = _load_training(args.data, spec.task, args.window)
        model = retrain_reduced(ds, plan, spec, n_jobs=args.threads)
    else:
        spec = _spec_from_config(args.config, args.task, args.seed, args.window)
        ds = _load_training(args.data, spec.task, args.window)
        model = fit_super(ds, spec, n_jobs=args.threads)
    size = save_model(model, args.out)
    log.info("trained %s super learner on %d rows, %d features; archive %d bytes",
             spec.task, ds.n, len(model.feature_subset), size)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = _model(args.model)
    ds = _load_for_model(args.data, model, need_target=True)
    seed = args.seed if args.seed is not None else model.spec.seed
    # blocked models get blocked outer folds; otherwise stratify whenever
    # every class can fill every fold
    blocked = model.spec.fold_scheme == "blocked"
    stratified = not blocked and model.task == "classify" and \
        np.bincount(ds.labels, minlength=len(ds.schema.class_levels)).min() >= args.kfold
    plan = data_mod.split_kfold(ds, args.kfold, seed, stratified=bool(stratified),
                                blocked=blocked)
    report = crossval_evaluate(ds, model.spec, plan, feature_subset=model.feature_subset,
                               n_jobs=args.threads)
    payload = report.to_dict()
    payload["kfold"] = args.kfold
    payload["seed"] = seed
    payload["stratified"] = bool(stratified)
    payload["blocked"] = blocked
    _write_json(args.report, payload)
    if model.task == "classify":
        log.info("%d-fold accuracy %.4f, macro AUC %.4f", args.kfold, report.accuracy,
                 report.auc_macro)
    else:
        log.info("%d-fold RMSE %.4f, R2 %.4f", args.kfold, report.rmse, report.r2)
    return EXIT_OK


def _feature_index(ds, ref) -> int:
    if ref is None:
        return 0
    names = list(ds.schema.names)
    if ref in names:
        return names.index(ref)
    try:
        j = int(ref)
    except ValueError:
        raise ConfigError(f"unknown feature {ref!r}") from None
    if not 0 <= j < ds.d:
        raise ConfigError(f"feature index {j} outside [0, {ds.d})")
    return j


def cmd_explain(args) -> int:
    model = _model(args.model)
    ds = _load_for_model(args.data, model, need_target=False)
    f = prediction_function(model)
    names = ds.schema.names
    seed = 0 if args.seed is None else args.seed
    if args.row is not None and not 0 <= args.row < ds.n:
        raise ConfigError(f"row {args.row} outside [0, {ds.n})")
    method = args.method
    if method == "shap" and args.row is None:
        result = global_mean_abs_shap(f, ds.X, args.background, args.explained, args.coalitions,
                                      seed, names, active=model.feature_subset)
        rows, payload = result.rows(), result.to_dict()
    elif method == "shap":
        rng = np.random.default_rng(seed)
        bg = ds.X[np.sort(rng.permutation(ds.n)[:min(args.background, ds.n)])]
        att = kernel_shap(f, bg, ds.X[args.row], args.coalitions, seed,
                          active=model.feature_subset)
        rows, payload = att.rows(names), att.to_dict(names)
    elif method == "morris":
        result = morris_for_dataset(f, ds.X, args.trajectories, args.levels, seed,
                                    ds.schema.cardinalities, names)
        rows, payload = result.rows(), result.to_dict()
    elif method == "lime":
        row = 0 if args.row is None else args.row
        cards = ds.schema.cardinalities
        cats = {j: np.bincount(ds.X[:, j].astype(np.int64), minlength=c) + 0.0
                for j, c in cards.items()}
        att = lime_explain(f, ds.X[row], ds.X.std(axis=0), ds.X.mean(axis=0), args.samples,
                           args.kernel_width, seed, cats)
        rows, payload = att.rows(names), att.to_dict(names)
        payload["unit"] = "raw model output (class probability or score)"
    else:
        j = _feature_index(ds, args.feature)
        curve = pdp_curve(f, ds.X, j, args.grid, categorical=j in ds.schema.categories)
        rows, payload = curve.rows(names[j]), curve.to_dict(names[j])
    write_report(args.out, rows, payload)
    log.info("wrote %s explanation to %s", method, args.out)
    return EXIT_OK


def cmd_reduce(args) -> int:
    model = _model(args.model)
    ds = _load_for_model(args.data, model, need_target=False)
    seed = 0 if args.seed is None else args.seed
    plan = plan_reduction(model, ds, fraction=args.fraction, k_override=args.k, rule=args.rule,
                          seed=seed, background_size=args.background,
                          n_explained=args.explained, n_coalitions=args.coalitions,
                          morris_r=args.trajectories, morris_p=args.levels)
    plan.save(args.out)
    log.info("selected %d of %d features: %s", plan.k, plan.d,
             ", ".join(ds.schema.names[j] for j in plan.selected))
    return EXIT_OK


def cmd_bench(args) -> int:
    model = _model(args.model)
    ds = _load_for_model(args.data, model, need_target=False)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad --sizes value {args.sizes!r}") from None
    report = bench_inference(model, ds.X, sizes, args.reps, args.warmup,
                             0 if args.seed is None else args.seed)
    payload = report.to_dict(include_timing=False)
    payload["timing"] = {k: v for k, v in report.to_dict().items() if k in report.TIMING_FIELDS}
    _write_json(args.report, payload)
    for size, mean, us in zip(report.sample_sizes, report.mean_s, report.per_sample_us):
        log.info("n=%d mean %.6fs (%.1f us/sample)", size, mean, us)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = _model(args.model)
    ds = _load_for_model(args.data, model, need_target=False)
    out = model.predict_output(ds.X)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if model.task == "classify":
            classes = model.classes
            w.writerow(["row", "label"] + [f"p_{c}" for c in classes])
            for i, row in enumerate(out):
                w.writerow([i, classes[int(np.argmax(row))]] + [repr(float(v)) for v in row])
        else:
            w.writerow(["row", "score"])
            for i, v in enumerate(out[:, 0]):
                w.writerow([i, repr(float(v))])
    log.info("wrote %d predictions to %s", out.shape[0], args.out)
    return EXIT_OK


# ------------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed override")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for training and explanation")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")

    p = _Parser(prog="stackreduce", description=__doc__, parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="write a planted-feature dataset")
    s.add_argument("--spec", required=True, help="key=value SyntheticSpec file")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", parents=[common], help="fit a super learner")
    s.add_argument("--data", required=True, help="training CSV")
    s.add_argument("--config", help="JSON super-learner config (preset, bases, meta_folds, ...)")
    s.add_argument("--plan", help="reduction plan: retrain on its selected features")
    s.add_argument("--out", required=True)
    s.add_argument("--task", choices=("classify", "regress"))
    s.add_argument("--window", type=int, help="regress on lagged windows of this length")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", parents=[common], help="k-fold evaluation of a model's spec")
    s.add_argument("--data", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--kfold", type=int, default=10, help="outer fold count")
    s.add_argument("--report", required=True, help="JSON report path")
    s.set_defaults(func=cmd_evaluate)

    def budgets(s):
        s.add_argument("--background", type=int, default=100, help="SHAP background rows")
        s.add_argument("--explained", type=int, default=200,
                       help="rows averaged for global SHAP")
        s.add_argument("--coalitions", type=int, default=None,
                       help="Kernel SHAP coalition budget (default 2d+2048)")
        s.add_argument("--trajectories", type=int, default=20, help="Morris trajectories r")
        s.add_argument("--levels", type=int, default=8, help="Morris grid levels p (even)")

    s = sub.add_parser("explain", parents=[common], help="SHAP, Morris, LIME or PDP report")
    s.add_argument("--data", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--method", required=True, choices=("shap", "morris", "lime", "pdp"))
    s.add_argument("--out", required=True, help="report path; .json or .csv")
    s.add_argument("--row", type=int, help="row to explain locally (shap, lime)")
    s.add_argument("--feature", help="feature name or index (pdp)")
    s.add_argument("--samples", type=int, default=5000, help="LIME perturbation samples")
    s.add_argument("--kernel-width", type=float, default=None, help="LIME kernel width")
    s.add_argument("--grid", type=int, default=20, help="PDP grid points")
    budgets(s)
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("reduce", parents=[common], help="rank features and plan a reduction")
    s.add_argument("--data", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--fraction", type=float, default=1.0 / 3.0,
                   help="fraction of features to keep")
    s.add_argument("--k", type=int, help="number of features to keep (overrides --fraction)")
    s.add_argument("--rule", choices=("borda", "shap_only", "morris_only"), default="borda",
                   help="how the SHAP and Morris rankings are merged")
    s.add_argument("--out", required=True)
    budgets(s)
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("bench", parents=[common], help="time single-threaded inference")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--sizes", default="1,10,100,500", help="comma-separated batch sizes")
    s.add_argument("--reps", type=int, default=10, help="timed repetitions per size")
    s.add_argument("--warmup", type=int, default=3, help="untimed repetitions per size")
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("predict", parents=[common], help="write predictions as CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        with threadpool_limits(limits=args.threads):
            return args.func(args)
    except ConfigError as exc:
        print(f"stackreduce: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"stackreduce: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ArchiveError as exc:
        print(f"stackreduce: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"stackreduce: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
