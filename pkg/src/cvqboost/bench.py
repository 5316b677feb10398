"""Desk-scale experiment sweeps with CSV / JSON reports.

Each axis value runs ``repeats`` sequential trials with seeds
``seed + trial`` (or ``seed`` for every trial when ``fixed_seed``).
Runtime is the wall time of training (or of the solve alone for the
``hamiltonian_size`` axis), measured after an untimed warm-up run. Failed trials are recorded on their row and the
sweep carries on.

CSV layout: ``#``-prefixed header lines carrying JSON metadata, then one
row per axis value with columns :data:`CSV_COLUMNS` in that order.
Error-bar columns (``err_*``) hold two standard deviations.
"""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import logging
import math
import os
import platform
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .balancing import BalanceConfig
from .dataset import (
    Dataset,
    SyntheticSpec,
    class_ratio,
    fit_scaler,
    generate_synthetic,
    scale_features,
    split_indices,
)
from .errors import ConfigError, SchemaError, VersionError
from .hamiltonian import assemble
from .metrics import auc
from .model import PHASES, TrainConfig, decision_scores, train
from .solver import SolverConfig, solve
from .weak import PoolConfig, build_pool, predict_matrix

log = logging.getLogger(__name__)

AXES = ("train_count", "feature_count", "class_ratio", "hamiltonian_size")
REPORT_VERSION = 1
MAX_TRAIN_COUNT = 500_000
MAX_HAMILTONIAN_SIZE = 1_000

CSV_COLUMNS = (
    "strategy",
    "value",
    "mean_auc",
    "std_auc",
    "err_auc",
    "mean_runtime_s",
    "std_runtime_s",
    "err_runtime_s",
    "repeats",
    "n_ok",
    *(f"frac_{p}" for p in PHASES),
    "mean_iterations",
    "balanced",
    "errors",
)


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    repeats: int = 5
    train_config: TrainConfig = field(default_factory=TrainConfig)
    solver_config: SolverConfig = field(
        default_factory=lambda: SolverConfig(max_iters=200, restarts=1, early_stop=False)
    )
    seed: int = 0
    fixed_seed: bool = False
    synthetic: SyntheticSpec = field(
        default_factory=lambda: SyntheticSpec(
            n_samples=5000, n_features=20, n_informative=10, class_sep=1.5,
            minority_fraction=0.05, flip_fraction=0.01,
        )
    )
    train_fraction: float = 0.8
    dataset: Optional[Dataset] = field(default=None, compare=False, repr=False)

    def validate(self) -> None:
        if self.axis not in AXES:
            raise ConfigError(f"unknown axis {self.axis!r}; expected one of {AXES}")
        if len(self.values) < 1:
            raise ConfigError("sweep needs at least one value")
        if any(v <= 0 for v in self.values):
            raise ConfigError("sweep values must be positive")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("sweep values must be strictly increasing")
        if self.repeats < 3:
            raise ConfigError("repeats must be >= 3")
        if self.axis == "train_count" and max(self.values) > MAX_TRAIN_COUNT:
            raise ConfigError(f"train_count is capped at {MAX_TRAIN_COUNT}")
        if self.axis == "hamiltonian_size" and max(self.values) > MAX_HAMILTONIAN_SIZE:
            raise ConfigError(f"hamiltonian_size is capped at {MAX_HAMILTONIAN_SIZE}")
        if self.axis == "class_ratio" and max(self.values) > 1:
            raise ConfigError("class ratios must lie in (0, 1]")
        self.train_config.validate()
        self.solver_config.validate()

    @property
    def strategy(self) -> Optional[str]:
        if self.axis != "class_ratio":
            return None
        bal = self.train_config.balance
        return bal.strategy if bal is not None else "smote"


@dataclass
class ReportRow:
    value: float
    repeats: int
    n_ok: int
    mean_runtime_s: Optional[float]
    std_runtime_s: Optional[float]
    mean_auc: Optional[float]
    std_auc: Optional[float]
    phase_fractions: dict = field(default_factory=dict)
    mean_iterations: Optional[float] = None
    balanced: Optional[bool] = None
    errors: list = field(default_factory=list)

    @property
    def err_runtime_s(self) -> Optional[float]:
        return None if self.std_runtime_s is None else 2.0 * self.std_runtime_s

    @property
    def err_auc(self) -> Optional[float]:
        return None if self.std_auc is None else 2.0 * self.std_auc


@dataclass
class Report:
    axis: str
    rows: list
    strategy: Optional[str] = None
    environment: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]


def capture_environment() -> dict:
    return {
        "cores": os.cpu_count() or 1,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "threads_env": os.environ.get("CVQBOOST_THREADS", ""),
    }


def _stats(xs):
    """Mean and sample std; exact zero std for identical values."""
    if not xs:
        return None, None
    xs = [float(x) for x in xs]
    std = statistics.stdev(xs) if len(xs) > 1 else 0.0
    return statistics.fmean(xs), std


def _with_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    bal = replace(cfg.balance, seed=seed) if cfg.balance is not None else None
    return replace(
        cfg, balance=bal, solver=replace(cfg.solver, seed=seed), pool=replace(cfg.pool, seed=seed)
    )


def _split(ds: Dataset, fraction: float, seed: int):
    train_idx, test_idx = split_indices(ds.labels, fraction, seed, stratified=True)
    return ds.subset(train_idx), ds.subset(test_idx)


def _trial_data(spec: SweepSpec, value, seed: int):
    """(train, test) for one trial; the axis value is applied here."""
    syn = replace(spec.synthetic, seed=seed)
    if spec.axis == "train_count":
        count = int(value)
        if spec.dataset is not None:
            train, test = _split(spec.dataset, spec.train_fraction, seed)
            if count < train.n_samples:
                keep, _ = split_indices(train.labels, count / train.n_samples, seed, True)
                train = train.subset(keep)
            return train, test
        n = math.ceil(count / spec.train_fraction)
        return _split(generate_synthetic(replace(syn, n_samples=n)), spec.train_fraction, seed)
    if spec.axis == "feature_count":
        f = int(value)
        if spec.dataset is not None:
            if f > spec.dataset.n_features:
                raise ConfigError(f"dataset has only {spec.dataset.n_features} features")
            ds = Dataset(spec.dataset.features[:, :f], spec.dataset.labels,
                         spec.dataset.feature_names[:f])
            return _split(ds, spec.train_fraction, seed)
        syn = replace(syn, n_features=f, n_informative=min(syn.n_informative, f))
        return _split(generate_synthetic(syn), spec.train_fraction, seed)
    ds = spec.dataset if spec.dataset is not None else generate_synthetic(syn)
    return _split(ds, spec.train_fraction, seed)


def _train_trial(spec: SweepSpec, value, seed: int) -> dict:
    train_ds, test_ds = _trial_data(spec, value, seed)
    cfg = _with_seed(spec.train_config, seed)
    balanced = None
    if spec.axis == "class_ratio":
        base = cfg.balance or BalanceConfig(strategy="smote")
        bal = replace(base, target_ratio=float(value))
        # downsampling cannot reach a ratio below the current one: train unbalanced
        balanced = not (
            bal.strategy == "downsample" and value < class_ratio(train_ds.labels) * (1 - 1e-12)
        )
        cfg = replace(cfg, balance=bal if balanced else None)
    t0 = time.perf_counter()
    model = train(train_ds, cfg)
    runtime = time.perf_counter() - t0
    total = model.metadata["total_train_s"]
    return {
        "runtime": runtime,
        "auc": auc(decision_scores(model, test_ds), test_ds.labels),
        "fractions": {p: model.metadata["timings_s"][p] / total for p in PHASES},
        "iterations": model.metadata["solver_iterations"],
        "balanced": balanced,
    }


def hamiltonian_for_size(n: int, synthetic: SyntheticSpec, seed: int):
    """CVQBoost Hamiltonian with exactly ``n`` variables (one classifier per feature)."""
    syn = replace(
        synthetic, n_features=n, n_informative=min(synthetic.n_informative, n),
        minority_fraction=0.5, seed=seed,
    )
    ds = generate_synthetic(syn)
    ds = ds.with_features(scale_features(ds.features, fit_scaler(ds.features)))
    pool = build_pool(ds, PoolConfig(include_pairs=False, max_classifiers=n))
    return assemble(predict_matrix(pool, ds), ds.labels, 1.0)


def _solver_trial(spec: SweepSpec, value, seed: int) -> dict:
    ham = hamiltonian_for_size(int(value), spec.synthetic, seed)
    cfg = replace(spec.solver_config, seed=seed)
    t0 = time.perf_counter()
    sol = solve(ham, cfg)
    runtime = time.perf_counter() - t0
    fractions = {p: 0.0 for p in PHASES}
    fractions["solve"] = 1.0
    return {"runtime": runtime, "auc": None, "fractions": fractions,
            "iterations": sol.iterations, "balanced": None}


def _warm_up(spec: SweepSpec) -> None:
    """Untimed small run so JIT compilation does not land in the first trial."""
    if spec.axis == "hamiltonian_size":
        solve(hamiltonian_for_size(3, spec.synthetic, spec.seed), spec.solver_config)
        return
    syn = SyntheticSpec(200, 3, 2, minority_fraction=0.3, seed=spec.seed)
    try:
        train(generate_synthetic(syn), spec.train_config)
    except Exception as exc:  # the real trials report their own failures
        log.debug("warm-up failed: %s", exc)


def run_sweep(spec: SweepSpec) -> Report:
    spec.validate()
    trial_fn = _solver_trial if spec.axis == "hamiltonian_size" else _train_trial
    _warm_up(spec)
    rows = []
    for value in spec.values:
        results, errors = [], []
        for t in range(spec.repeats):
            seed = spec.seed if spec.fixed_seed else spec.seed + t
            try:
                results.append(trial_fn(spec, value, seed))
            except Exception as exc:  # recorded per row, sweep continues
                log.warning("trial %s=%s seed=%d failed: %s", spec.axis, value, seed, exc)
                errors.append(f"seed {seed}: {type(exc).__name__}: {exc}")
        mean_rt, std_rt = _stats([r["runtime"] for r in results])
        aucs = [r["auc"] for r in results if r["auc"] is not None]
        mean_auc, std_auc = _stats(aucs)
        fractions = {
            p: float(np.mean([r["fractions"][p] for r in results])) for p in PHASES
        } if results else {}
        balanced = [r["balanced"] for r in results if r["balanced"] is not None]
        rows.append(ReportRow(
            value=value,
            repeats=spec.repeats,
            n_ok=len(results),
            mean_runtime_s=mean_rt,
            std_runtime_s=std_rt,
            mean_auc=mean_auc,
            std_auc=std_auc,
            phase_fractions=fractions,
            mean_iterations=_stats([r["iterations"] for r in results])[0],
            balanced=all(balanced) if balanced else None,
            errors=errors,
        ))
        log.info("%s=%s: runtime %s s, auc %s", spec.axis, value, mean_rt, mean_auc)
    return Report(spec.axis, rows, spec.strategy, capture_environment())


def scaling_exponent(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.size < 3:
        raise ConfigError("scaling fit needs at least 3 (x, y) points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ConfigError("scaling fit needs positive values")
    if np.ptp(x) == 0:
        raise ConfigError("scaling fit needs a non-constant axis")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def fit_scaling_exponent(report: Report, column: str = "mean_runtime_s") -> float:
    """Scaling exponent of a report column against the axis value."""
    pts = [(r.value, getattr(r, column)) for r in report.rows]
    pts = [(x, y) for x, y in pts if y is not None]
    return scaling_exponent([p[0] for p in pts], [p[1] for p in pts])


# ---------------------------------------------------------------- serialization

def _row_to_dict(row: ReportRow) -> dict:
    return {
        "value": row.value,
        "repeats": row.repeats,
        "n_ok": row.n_ok,
        "mean_runtime_s": row.mean_runtime_s,
        "std_runtime_s": row.std_runtime_s,
        "err_runtime_s": row.err_runtime_s,
        "mean_auc": row.mean_auc,
        "std_auc": row.std_auc,
        "err_auc": row.err_auc,
        "phase_fractions": row.phase_fractions,
        "mean_iterations": row.mean_iterations,
        "balanced": row.balanced,
        "errors": row.errors,
    }


def _row_from_dict(doc: dict) -> ReportRow:
    return ReportRow(
        value=doc["value"],
        repeats=doc["repeats"],
        n_ok=doc["n_ok"],
        mean_runtime_s=doc["mean_runtime_s"],
        std_runtime_s=doc["std_runtime_s"],
        mean_auc=doc["mean_auc"],
        std_auc=doc["std_auc"],
        phase_fractions=dict(doc["phase_fractions"]),
        mean_iterations=doc["mean_iterations"],
        balanced=doc["balanced"],
        errors=list(doc["errors"]),
    )


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _num(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        return float(s)


def _to_csv(report: Report) -> str:
    buf = io.StringIO()
    buf.write(f"# cvqboost-report format_version={REPORT_VERSION}\n")
    buf.write("# meta=" + json.dumps({"axis": report.axis, "strategy": report.strategy}) + "\n")
    buf.write("# environment=" + json.dumps(report.environment, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        d = _row_to_dict(row)
        cells = []
        for col in CSV_COLUMNS:
            if col == "strategy":
                cells.append(report.strategy or "")
            elif col.startswith("frac_"):
                cells.append(_cell(row.phase_fractions.get(col[5:])))
            elif col == "errors":
                cells.append(json.dumps(row.errors) if row.errors else "")
            else:
                cells.append(_cell(d[col]))
        writer.writerow(cells)
    return buf.getvalue()


def _from_csv(text: str, source: str) -> Report:
    lines = text.splitlines()
    meta, env, body = None, {}, []
    version = None
    for line in lines:
        if line.startswith("# cvqboost-report"):
            version = line.split("format_version=", 1)[-1].strip()
        elif line.startswith("# meta="):
            meta = json.loads(line[len("# meta="):])
        elif line.startswith("# environment="):
            env = json.loads(line[len("# environment="):])
        elif not line.startswith("#"):
            body.append(line)
    if version is None or meta is None:
        raise SchemaError(f"{source}: missing report header lines")
    if version != str(REPORT_VERSION):
        raise VersionError(f"{source}: unsupported report format_version {version}")
    reader = csv.reader(body)
    header = tuple(next(reader))
    if header != CSV_COLUMNS:
        raise SchemaError(f"{source}: unexpected CSV columns {header}")
    rows = []
    for cells in reader:
        rec = dict(zip(header, cells))
        fractions = {c[5:]: float(rec[c]) for c in header if c.startswith("frac_") and rec[c]}
        rows.append(ReportRow(
            value=_num(rec["value"]),
            repeats=int(rec["repeats"]),
            n_ok=int(rec["n_ok"]),
            mean_runtime_s=_num(rec["mean_runtime_s"]),
            std_runtime_s=_num(rec["std_runtime_s"]),
            mean_auc=_num(rec["mean_auc"]),
            std_auc=_num(rec["std_auc"]),
            phase_fractions=fractions,
            mean_iterations=_num(rec["mean_iterations"]),
            balanced=None if rec["balanced"] == "" else rec["balanced"] == "true",
            errors=json.loads(rec["errors"]) if rec["errors"] else [],
        ))
    return Report(meta["axis"], rows, meta["strategy"], env)


def emit(report: Report, fmt: str, path) -> None:
    path = Path(path)
    if fmt == "csv":
        path.write_text(_to_csv(report), encoding="utf-8")
    elif fmt == "json":
        doc = {
            "format_version": REPORT_VERSION,
            "axis": report.axis,
            "strategy": report.strategy,
            "environment": report.environment,
            "rows": [_row_to_dict(r) for r in report.rows],
        }
        path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    else:
        raise ConfigError(f"unknown report format {fmt!r}; expected csv or json")


def read_report(path, fmt: Optional[str] = None) -> Report:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    text = path.read_text(encoding="utf-8")
    if fmt == "csv":
        return _from_csv(text, str(path))
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if doc.get("format_version") != REPORT_VERSION:
        raise VersionError(f"{path}: unsupported report format_version {doc.get('format_version')!r}")
    return Report(doc["axis"], [_row_from_dict(r) for r in doc["rows"]],
                  doc["strategy"], doc["environment"])
