"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Results go to the
``--out`` path of each subcommand; only ``inspect`` and ``--help`` write to
stdout. Logs go to stderr.

Training options resolve as: flags > ``--config`` JSON file > defaults.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import model as model_mod
from .balancing import STRATEGIES, BalanceConfig
from .dataset import (
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    parse_feature_rows,
    read_csv_table,
    save_csv,
    train_test_split,
)
from .errors import ConfigError, CVQBoostError
from .hamiltonian import save_json
from .metrics import accuracy, auc, balanced_accuracy
from .solver import BACKENDS, save_solution, save_trace_csv, solve_file

log = logging.getLogger("cvqboost")

METRICS = {"auc", "accuracy", "balanced_accuracy"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _numbers(text: str) -> list:
    out = []
    for v in text.split(","):
        v = v.strip()
        if not v:
            continue
        try:
            out.append(int(v))
        except ValueError:
            try:
                out.append(float(v))
            except ValueError:
                raise argparse.ArgumentTypeError(f"not a number: {v!r}") from None
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")


def _data_flags(p: argparse.ArgumentParser, label_required: bool = True) -> None:
    p.add_argument("--input", required=True, help="CSV with a header row")
    p.add_argument("--label-column", default="Class" if label_required else None)
    p.add_argument("--positive-label", default="1")


def _train_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--config", help="JSON file mirroring TrainConfig")
    g.add_argument("--balance", choices=("none", *STRATEGIES), default=None)
    g.add_argument("--ratio", type=float, default=None, help="target minority/majority ratio")
    g.add_argument("--k-neighbors", type=int, default=None)
    g.add_argument("--pairs", action=argparse.BooleanOptionalAction, default=None,
                   help="include two-feature weak classifiers (default on)")
    g.add_argument("--max-weak", type=int, default=None)
    g.add_argument("--weak-iters", type=int, default=None)
    g.add_argument("--weak-tol", type=float, default=None)
    g.add_argument("--lambda", dest="lam", type=_floats, default=None,
                   help="ridge strength; a comma list is tuned on a validation split")
    g.add_argument("--validation-fraction", type=float, default=0.2)
    g.add_argument("--threshold-rule", choices=model_mod.THRESHOLD_RULES, default=None)
    g.add_argument("--sum-constraint", type=float, default=None)
    _solver_flags(g)


def _solver_flags(g) -> None:
    g.add_argument("--backend", choices=BACKENDS, default=None)
    g.add_argument("--max-iters", type=int, default=None)
    g.add_argument("--tol", type=float, default=None)
    g.add_argument("--restarts", type=int, default=None)
    g.add_argument("--emulate-db", type=float, default=None,
                   help="clamp the Hamiltonian to this dynamic range (dB) before solving")
    g.add_argument("--grid-resolution", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cvqboost", description="CVQBoost training, scoring and benchmarks")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("generate", help="write a synthetic dataset (or Hamiltonian)")
    _common(p)
    p.add_argument("--n-samples", type=int, default=10000)
    p.add_argument("--n-features", type=int, default=20)
    p.add_argument("--n-informative", type=int, default=10)
    p.add_argument("--class-sep", type=float, default=1.5)
    p.add_argument("--minority-fraction", type=float, default=0.05)
    p.add_argument("--flip-fraction", type=float, default=0.01)
    p.add_argument("--label-column", default="Class")
    p.add_argument("--hamiltonian-size", type=int, default=None,
                   help="write a pipeline Hamiltonian with this many variables instead")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="fit a model from a CSV file")
    _common(p)
    _data_flags(p)
    p.add_argument("--train-fraction", type=float, default=None,
                   help="hold out 1 - fraction of rows (default: train on everything)")
    p.add_argument("--stratify", action="store_true")
    p.add_argument("--holdout-out", help="write the held-out rows to this CSV")
    _train_flags(p)
    p.add_argument("--out", required=True, help="model JSON path")

    p = sub.add_parser("predict", help="score a CSV file with a saved model")
    _common(p)
    p.add_argument("--model", required=True)
    _data_flags(p, label_required=False)
    p.add_argument("--out", "--output", dest="out", required=True)

    p = sub.add_parser("evaluate", help="compute metrics of a saved model on a labeled CSV")
    _common(p)
    p.add_argument("--model", required=True)
    _data_flags(p)
    p.add_argument("--metric", default="auc",
                   help="comma list of: auc, accuracy, balanced_accuracy")
    p.add_argument("--out", required=True)

    p = sub.add_parser("solve", help="minimize a Hamiltonian JSON file on the simplex")
    _common(p)
    p.add_argument("--input", required=True)
    _solver_flags(p)
    p.add_argument("--trace", help="write the (iteration, energy) trace as CSV")
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="run a desk-scale sweep and write a report")
    _common(p)
    p.add_argument("--axis", required=True,
                   type=lambda s: s.replace("-", "_"),
                   choices=bench_mod.AXES)
    p.add_argument("--values", required=True, type=_numbers)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--fixed-seed", action="store_true", help="reuse one seed for all trials")
    p.add_argument("--input", help="use this CSV instead of synthetic data")
    p.add_argument("--label-column", default="Class")
    p.add_argument("--positive-label", default="1")
    p.add_argument("--n-samples", type=int, default=5000)
    p.add_argument("--n-features", type=int, default=20)
    p.add_argument("--n-informative", type=int, default=10)
    p.add_argument("--class-sep", type=float, default=1.5)
    p.add_argument("--minority-fraction", type=float, default=0.05)
    p.add_argument("--flip-fraction", type=float, default=0.01)
    p.add_argument("--solver-iters", type=int, default=200,
                   help="fixed iteration count for the hamiltonian-size axis")
    _train_flags(p)
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help="default: from the --out suffix")
    p.add_argument("--out", required=True)

    p = sub.add_parser("inspect", help="print a model's weak classifiers by weight")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--top", type=int, default=None)
    return parser


def resolve_train_config(args) -> tuple[model_mod.TrainConfig, list[float]]:
    """TrainConfig plus the lambda candidates (one entry unless tuning)."""
    doc = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{args.config}: top level must be a JSON object")
    lam_doc = doc.get("lambda")
    if isinstance(lam_doc, list):
        doc = {k: v for k, v in doc.items() if k != "lambda"}
    cfg = model_mod.TrainConfig.from_dict(doc)
    seed = args.seed

    bal = cfg.balance
    if args.balance == "none":
        bal = None
    elif args.balance is not None or args.ratio is not None or args.k_neighbors is not None:
        bal = bal or BalanceConfig()
        updates = {}
        if args.balance is not None:
            updates["strategy"] = args.balance
        if args.ratio is not None:
            updates["target_ratio"] = args.ratio
        if args.k_neighbors is not None:
            updates["k_neighbors"] = args.k_neighbors
        bal = replace(bal, **updates)
    if bal is not None and seed is not None:
        bal = replace(bal, seed=seed)

    pool_updates = {
        k: v for k, v in {
            "include_pairs": args.pairs,
            "max_classifiers": args.max_weak,
            "logistic_max_iters": args.weak_iters,
            "logistic_tolerance": args.weak_tol,
            "seed": seed,
        }.items() if v is not None
    }
    solver_updates = _solver_updates(args)
    if seed is not None:
        solver_updates["seed"] = seed
    cfg = replace(
        cfg,
        balance=bal,
        pool=replace(cfg.pool, **pool_updates),
        solver=replace(cfg.solver, **solver_updates),
    )
    if args.threshold_rule is not None:
        cfg = replace(cfg, threshold_rule=args.threshold_rule)
    if args.sum_constraint is not None:
        cfg = replace(cfg, sum_constraint=args.sum_constraint)
    if args.lam is not None:
        lambdas = args.lam
    elif isinstance(lam_doc, list):
        lambdas = [float(v) for v in lam_doc]
    else:
        lambdas = [cfg.lam]
    if not lambdas:
        raise ConfigError("--lambda needs at least one value")
    cfg = replace(cfg, lam=lambdas[0])
    cfg.validate()
    return cfg, lambdas


def _solver_updates(args) -> dict:
    pairs = {
        "backend": args.backend,
        "max_iters": args.max_iters,
        "tolerance": args.tol,
        "restarts": args.restarts,
        "emulate_range_db": args.emulate_db,
        "grid_resolution": args.grid_resolution,
    }
    return {k: v for k, v in pairs.items() if v is not None}


def _cmd_generate(args) -> None:
    seed = args.seed if args.seed is not None else 0
    spec = SyntheticSpec(
        n_samples=args.n_samples,
        n_features=args.n_features,
        n_informative=args.n_informative,
        class_sep=args.class_sep,
        minority_fraction=args.minority_fraction,
        flip_fraction=args.flip_fraction,
        seed=seed,
    )
    if args.hamiltonian_size is not None:
        ham = bench_mod.hamiltonian_for_size(args.hamiltonian_size, spec, seed)
        save_json(ham, args.out)
        log.info("wrote %d-variable Hamiltonian to %s", ham.n, args.out)
        return
    ds = generate_synthetic(spec)
    save_csv(ds, args.out, args.label_column)
    log.info("wrote %d x %d dataset to %s", ds.n_samples, ds.n_features, args.out)


def _cmd_train(args) -> None:
    cfg, lambdas = resolve_train_config(args)
    seed = args.seed if args.seed is not None else 0
    ds = load_csv(args.input, args.label_column, args.positive_label)
    if args.train_fraction is not None and args.train_fraction < 1:
        ds, holdout = train_test_split(ds, args.train_fraction, seed, args.stratify)
        if args.holdout_out:
            save_csv(holdout, args.holdout_out, args.label_column)
    elif args.holdout_out:
        raise ConfigError("--holdout-out needs --train-fraction below 1")
    if len(lambdas) > 1:
        m = model_mod.tune_lambda(ds, cfg, lambdas, args.validation_fraction, seed)
    else:
        m = model_mod.train(ds, cfg)
    model_mod.save(m, args.out)
    log.info("trained %d classifiers in %.3fs; model written to %s",
             len(m.pool), m.metadata["total_train_s"], args.out)


def _model_features(m, path, label_column):
    """Feature matrix of a CSV in the model's column order."""
    header, rows = read_csv_table(path)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    names = m.feature_names
    missing = [n for n in names if n not in header]
    if missing:
        raise ConfigError(f"{path}: missing model feature column(s) {', '.join(missing[:5])}")
    cols = [header.index(n) for n in names]
    return header, rows, parse_feature_rows(path, header, rows, cols)


def _cmd_predict(args) -> None:
    m = model_mod.load(args.model)
    _, _, x = _model_features(m, args.input, args.label_column)
    scores = model_mod.decision_scores(m, x)
    labels = np.where(scores > m.threshold, 1, -1)
    with Path(args.out).open("w", encoding="utf-8") as fh:
        fh.write("score,label\n")
        for s, y in zip(scores, labels):
            fh.write(f"{float(s)!r},{int(y)}\n")


def _cmd_evaluate(args) -> None:
    metrics = [m.strip() for m in args.metric.split(",") if m.strip()]
    unknown = set(metrics) - METRICS
    if unknown or not metrics:
        raise ConfigError(f"unknown metric(s) {sorted(unknown)}; choose from {sorted(METRICS)}")
    m = model_mod.load(args.model)
    ds = load_csv(args.input, args.label_column, args.positive_label)
    scores = model_mod.decision_scores(m, ds.features[:, _column_order(m, ds)])
    predicted = np.where(scores > m.threshold, 1, -1)
    out = {"n_samples": ds.n_samples, "n_positive": ds.n_positive}
    for name in metrics:
        if name == "auc":
            out["auc"] = auc(scores, ds.labels)
        elif name == "accuracy":
            out["accuracy"] = accuracy(predicted, ds.labels)
        else:
            out["balanced_accuracy"] = balanced_accuracy(predicted, ds.labels)
    Path(args.out).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")


def _column_order(m, ds):
    if not m.feature_names:
        return list(range(ds.n_features))
    missing = [n for n in m.feature_names if n not in ds.feature_names]
    if missing:
        raise ConfigError(f"input lacks model feature column(s) {', '.join(missing[:5])}")
    return [ds.feature_names.index(n) for n in m.feature_names]


def _cmd_solve(args) -> None:
    from .solver import SolverConfig

    updates = _solver_updates(args)
    if args.seed is not None:
        updates["seed"] = args.seed
    cfg = SolverConfig(**updates)
    sol = solve_file(args.input, cfg)
    save_solution(sol, args.out)
    if args.trace:
        save_trace_csv(sol, args.trace)
    log.info("%s: energy %.10g after %d iterations", cfg.backend, sol.energy, sol.iterations)


def _cmd_bench(args) -> None:
    cfg, lambdas = resolve_train_config(args)
    if len(lambdas) > 1:
        raise ConfigError("bench takes a single --lambda value")
    seed = args.seed if args.seed is not None else 0
    synthetic = SyntheticSpec(
        n_samples=args.n_samples,
        n_features=args.n_features,
        n_informative=args.n_informative,
        class_sep=args.class_sep,
        minority_fraction=args.minority_fraction,
        flip_fraction=args.flip_fraction,
        seed=seed,
    )
    dataset = None
    if args.input:
        dataset = load_csv(args.input, args.label_column, args.positive_label)
    solver_cfg = replace(cfg.solver, max_iters=args.solver_iters, restarts=1, early_stop=False)
    spec = bench_mod.SweepSpec(
        axis=args.axis,
        values=tuple(args.values),
        repeats=args.repeats,
        train_config=cfg,
        solver_config=solver_cfg,
        seed=seed,
        fixed_seed=args.fixed_seed,
        synthetic=synthetic,
        dataset=dataset,
    )
    report = bench_mod.run_sweep(spec)
    fmt = args.format or ("json" if args.out.lower().endswith(".json") else "csv")
    bench_mod.emit(report, fmt, args.out)


def _cmd_inspect(args) -> None:
    m = model_mod.load(args.model)
    rows = model_mod.weight_table(m, args.top)
    print(f"model: {len(m.pool)} weak classifiers, lambda={m.lam!r}, "
          f"sum constraint={m.sum_constraint!r}, threshold={m.threshold!r}")
    print(f"{'rank':>4}  {'weight':>14}  {'features':<32}  coefficients / intercept")
    for r in rows:
        feats = " + ".join(r["features"])
        coefs = ", ".join(f"{c:.6g}" for c in r["coefficients"])
        print(f"{r['rank']:>4}  {r['weight']:>14.10f}  {feats:<32}  [{coefs}] / {r['intercept']:.6g}")
    print(f"total weight shown: {sum(r['weight'] for r in rows):.10f}")


COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "solve": _cmd_solve,
    "bench": _cmd_bench,
    "inspect": _cmd_inspect,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(f"cvqboost {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (CVQBoostError, OSError, ValueError) as exc:
        print(f"cvqboost {args.command}: failed: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(dispatch())
