"""Train / score / persist the strong classifier ``score(x) = sum_i w_i h_i(x)``.

Training pipeline: standardize -> balance (optional) -> weak pool ->
prediction matrix -> Hamiltonian -> simplex solve -> threshold.
The scaler is fit on training data only and test data is never rebalanced.
"""
from __future__ import annotations

import json
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .balancing import BalanceConfig, balance
from .dataset import Dataset, ScalerParams, fit_scaler, scale_features, split_indices
from .errors import ConfigError, DataError, SchemaError, VersionError
from .hamiltonian import assemble, dynamic_range_db, with_lambda
from .metrics import auc, best_balanced_threshold
from .solver import SolverConfig, solve
from .weak import PoolConfig, WeakClassifier, build_pool, predict_matrix

FORMAT_VERSION = 1
THRESHOLD_RULES = ("zero", "balanced_accuracy")
PHASES = ("standardize", "balance", "pool", "predict", "assemble", "solve", "threshold")

_MODEL_KEYS = {
    "format_version", "feature_names", "scaler", "pool", "weights",
    "threshold", "lambda", "sum_constraint", "metadata",
}


@dataclass(frozen=True)
class TrainConfig:
    balance: Optional[BalanceConfig] = None
    pool: PoolConfig = field(default_factory=PoolConfig)
    lam: float = 1.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    threshold_rule: str = "zero"
    sum_constraint: float = 1.0

    def validate(self) -> None:
        if self.balance is not None:
            self.balance.validate()
        self.pool.validate()
        self.solver.validate()
        if self.lam < 0:
            raise ConfigError("lambda must be non-negative")
        if self.threshold_rule not in THRESHOLD_RULES:
            raise ConfigError(
                f"unknown threshold_rule {self.threshold_rule!r}; expected one of {THRESHOLD_RULES}"
            )
        if not self.sum_constraint > 0:
            raise ConfigError("sum_constraint must be positive")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["lambda"] = doc.pop("lam")
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        """Build from a (possibly partial) nested dict; missing keys keep defaults."""
        doc = dict(doc)
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        known = {"balance", "pool", "lam", "solver", "threshold_rule", "sum_constraint"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        try:
            if doc.get("balance") is not None:
                doc["balance"] = BalanceConfig(**doc["balance"])
            if "pool" in doc:
                doc["pool"] = PoolConfig(**doc["pool"])
            if "solver" in doc:
                doc["solver"] = SolverConfig(**doc["solver"])
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from None


@dataclass(frozen=True)
class Model:
    pool: tuple[WeakClassifier, ...]
    weights: np.ndarray
    scaler: ScalerParams
    threshold: float = 0.0
    lam: float = 1.0
    feature_names: tuple[str, ...] = ()
    sum_constraint: float = 1.0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if not self.pool:
            raise DataError("model pool is empty")
        if w.shape != (len(self.pool),):
            raise DataError(f"{w.size} weights for {len(self.pool)} classifiers")
        if np.any(w < 0) or abs(w.sum() - self.sum_constraint) > 1e-9 * self.sum_constraint:
            raise DataError("weights must be non-negative and sum to the sum constraint")
        w.setflags(write=False)
        object.__setattr__(self, "pool", tuple(self.pool))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_features(self) -> int:
        return self.scaler.means.size


class _Timer:
    def __init__(self):
        self.phases = {p: 0.0 for p in PHASES}

    @contextmanager
    def __call__(self, phase):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.phases[phase] += time.perf_counter() - t0


def _prepare(ds: Dataset, cfg: TrainConfig, timer: _Timer):
    """Scaler, training set actually fitted on, pool and prediction matrix."""
    if ds.n_positive == 0 or ds.n_negative == 0:
        raise DataError("training data must contain both classes")
    with timer("standardize"):
        scaler = fit_scaler(ds.features)
        fitted = ds.with_features(scale_features(ds.features, scaler))
    with timer("balance"):
        fitted = balance(fitted, cfg.balance)
    if fitted.n_positive == 0 or fitted.n_negative == 0:
        raise DataError("training data lost a class during balancing")
    with timer("pool"):
        pool = build_pool(fitted, cfg.pool)
    with timer("predict"):
        H = predict_matrix(pool, fitted)
    return scaler, fitted, pool, H


def _select_threshold(rule, scores, labels) -> float:
    if rule == "zero":
        return 0.0
    return best_balanced_threshold(scores, labels)


def train(ds: Dataset, cfg: TrainConfig = TrainConfig()) -> Model:
    cfg.validate()
    start = time.perf_counter()
    timer = _Timer()
    scaler, fitted, pool, H = _prepare(ds, cfg, timer)
    with timer("assemble"):
        ham = assemble(H, fitted.labels, cfg.lam, cfg.sum_constraint)
    with timer("solve"):
        sol = solve(ham, cfg.solver)
    with timer("threshold"):
        train_scores = H @ sol.weights
        threshold = _select_threshold(cfg.threshold_rule, train_scores, fitted.labels)
    total = time.perf_counter() - start
    metadata = {
        "seeds": {
            "balance": cfg.balance.seed if cfg.balance else None,
            "pool": cfg.pool.seed,
            "solver": cfg.solver.seed,
        },
        "config": cfg.to_dict(),
        "timings_s": dict(timer.phases),
        "total_train_s": total,
        "n_train": ds.n_samples,
        "n_fitted": fitted.n_samples,
        "n_classifiers": len(pool),
        "energy": sol.energy,
        "boost_loss": sol.boost_loss,
        "solver_iterations": sol.iterations,
        "solver_converged": sol.converged,
        "dynamic_range_db": _safe_range(ham),
        "train_auc": auc(train_scores, fitted.labels),
    }
    return Model(
        pool=tuple(pool),
        weights=sol.weights,
        scaler=scaler,
        threshold=threshold,
        lam=cfg.lam,
        feature_names=ds.feature_names,
        sum_constraint=cfg.sum_constraint,
        metadata=metadata,
    )


def _safe_range(ham) -> Optional[float]:
    try:
        return dynamic_range_db(ham)
    except DataError:
        return None


def tune_lambda(
    ds: Dataset,
    cfg: TrainConfig,
    lambdas: Sequence[float],
    validation_fraction: float = 0.2,
    seed: int = 0,
) -> Model:
    """Pick lambda by validation AUC on a stratified hold-out, then refit on all of ``ds``.

    Ties go to the earliest candidate in ``lambdas``.
    """
    if not lambdas:
        raise ConfigError("no lambda candidates given")
    cfg.validate()
    fit_idx, val_idx = split_indices(ds.labels, 1 - validation_fraction, seed, stratified=True)
    fit_ds, val_ds = ds.subset(fit_idx), ds.subset(val_idx)
    scaler, fitted, pool, H = _prepare(fit_ds, cfg, _Timer())
    H_val = predict_matrix(pool, scale_features(val_ds.features, scaler))
    base = assemble(H, fitted.labels, 0.0, cfg.sum_constraint)
    scores = {}
    for lam in lambdas:
        if lam < 0:
            raise ConfigError("lambda must be non-negative")
        sol = solve(with_lambda(base, lam), cfg.solver)
        scores[float(lam)] = auc(H_val @ sol.weights, val_ds.labels)
    best = max(scores, key=lambda lam: (scores[lam], -list(scores).index(lam)))
    model = train(ds, replace(cfg, lam=best))
    model.metadata["lambda_search"] = {
        "validation_fraction": validation_fraction,
        "validation_auc": {repr(k): v for k, v in scores.items()},
        "selected": best,
    }
    return model


def _features_of(m: Model, ds_or_features) -> np.ndarray:
    x = np.asarray(getattr(ds_or_features, "features", ds_or_features), dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != m.n_features:
        raise DataError(f"model expects {m.n_features} features, got {x.shape[1]}")
    return x


def decision_scores(m: Model, ds_or_features) -> np.ndarray:
    """Weighted weak-classifier vote on raw (unscaled) rows; lies in [-R, R]."""
    x = scale_features(_features_of(m, ds_or_features), m.scaler)
    return predict_matrix(m.pool, x) @ m.weights


def predict(m: Model, ds_or_features) -> np.ndarray:
    return np.where(decision_scores(m, ds_or_features) > m.threshold, 1, -1)


def to_json_dict(m: Model) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "feature_names": list(m.feature_names),
        "scaler": {"means": m.scaler.means.tolist(), "std_devs": m.scaler.std_devs.tolist()},
        "pool": [
            {
                "features": list(wc.feature_indices),
                "coefficients": list(wc.coefficients),
                "intercept": wc.intercept,
                "train_auc": wc.train_auc,
                "converged": wc.converged,
            }
            for wc in m.pool
        ],
        "weights": m.weights.tolist(),
        "threshold": m.threshold,
        "lambda": m.lam,
        "sum_constraint": m.sum_constraint,
        "metadata": m.metadata,
    }


def from_json_dict(doc, source="<document>") -> Model:
    if not isinstance(doc, dict):
        raise SchemaError(f"{source}: top level must be a JSON object")
    if "format_version" not in doc:
        raise SchemaError(f"{source}: missing format_version")
    version = doc["format_version"]
    if version != FORMAT_VERSION:
        raise VersionError(
            f"{source}: unsupported model format_version {version!r} "
            f"(this build reads version {FORMAT_VERSION})"
        )
    missing = _MODEL_KEYS - set(doc)
    if missing:
        raise SchemaError(f"{source}: missing field(s) {', '.join(sorted(missing))}")
    unknown = set(doc) - _MODEL_KEYS
    if unknown:
        raise SchemaError(f"{source}: unknown field(s) {', '.join(sorted(unknown))}")
    try:
        pool = tuple(
            WeakClassifier(
                tuple(item["features"]),
                tuple(item["coefficients"]),
                item["intercept"],
                item.get("train_auc", 0.5),
                bool(item.get("converged", True)),
            )
            for item in doc["pool"]
        )
        scaler = ScalerParams(doc["scaler"]["means"], doc["scaler"]["std_devs"])
        model = Model(
            pool=pool,
            weights=np.asarray(doc["weights"], dtype=np.float64),
            scaler=scaler,
            threshold=float(doc["threshold"]),
            lam=float(doc["lambda"]),
            feature_names=tuple(doc["feature_names"]),
            sum_constraint=float(doc["sum_constraint"]),
            metadata=dict(doc["metadata"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{source}: malformed model ({exc!r})") from None
    if max(max(wc.feature_indices) for wc in pool) >= model.n_features:
        raise SchemaError(f"{source}: pool references a feature beyond the scaler width")
    if model.feature_names and len(model.feature_names) != model.n_features:
        raise SchemaError(f"{source}: feature_names length does not match scaler width")
    return model


def save(m: Model, path) -> None:
    Path(path).write_text(json.dumps(to_json_dict(m), indent=1), encoding="utf-8")


def load(path) -> Model:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    return from_json_dict(doc, str(path))


def weight_table(m: Model, top: Optional[int] = None) -> list[dict]:
    """Classifiers sorted by descending weight (stable on ties)."""
    order = sorted(range(len(m.pool)), key=lambda i: -m.weights[i])
    if top is not None:
        order = order[:top]
    names = m.feature_names or tuple(f"f{i}" for i in range(m.n_features))
    return [
        {
            "rank": r + 1,
            "index": i,
            "features": [names[j] for j in m.pool[i].feature_indices],
            "coefficients": list(m.pool[i].coefficients),
            "intercept": m.pool[i].intercept,
            "weight": float(m.weights[i]),
        }
        for r, i in enumerate(order)
    ]
