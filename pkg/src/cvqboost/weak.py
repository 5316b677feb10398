"""Weak classifiers: ridge logistic regressions on one or two feature columns.

Each classifier outputs ``2*sigmoid(z) - 1 = tanh(z/2)`` in [-1, 1].
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError
from .metrics import auc

RIDGE = 1e-4


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class WeakClassifier:
    feature_indices: tuple[int, ...]
    coefficients: tuple[float, ...]
    intercept: float
    train_auc: float = 0.5
    converged: bool = True

    def __post_init__(self):
        idx = tuple(int(i) for i in self.feature_indices)
        coef = tuple(float(c) for c in self.coefficients)
        if not 1 <= len(idx) <= 2 or len(set(idx)) != len(idx) or min(idx) < 0:
            raise DataError(f"feature_indices must be 1 or 2 distinct non-negative ints: {idx}")
        if len(coef) != len(idx) or not np.all(np.isfinite(coef)):
            raise DataError("coefficients must be finite, one per feature index")
        object.__setattr__(self, "feature_indices", idx)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "intercept", float(self.intercept))

    def logit(self, features: np.ndarray) -> np.ndarray:
        z = self.intercept + self.coefficients[0] * features[:, self.feature_indices[0]]
        if len(self.feature_indices) == 2:
            z = z + self.coefficients[1] * features[:, self.feature_indices[1]]
        return z

    def decision(self, features: np.ndarray) -> np.ndarray:
        """Scores in [-1, 1] for every row of a full feature matrix."""
        return np.tanh(0.5 * self.logit(np.asarray(features, dtype=np.float64)))


@dataclass(frozen=True)
class PoolConfig:
    include_pairs: bool = True
    max_classifiers: int = 1000
    logistic_max_iters: int = 100
    logistic_tolerance: float = 1e-6
    seed: int = 0

    def validate(self) -> None:
        if self.max_classifiers < 1:
            raise ConfigError("max_classifiers must be >= 1")
        if self.logistic_max_iters < 1 or not self.logistic_tolerance > 0:
            raise ConfigError("logistic_max_iters and logistic_tolerance must be positive")


def evaluate(wc: WeakClassifier, x) -> float:
    """Score of a single feature row."""
    row = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(wc.decision(row)[0])


def logistic_loss(theta: np.ndarray, x: np.ndarray, y: np.ndarray, ridge: float = RIDGE):
    """Mean logistic loss + ridge/2 * |coef|^2 and its gradient.

    ``theta = [intercept, coef...]``; the intercept is not penalized.
    """
    z = theta[0] + x @ theta[1:]
    margin = y * z
    loss = np.mean(np.logaddexp(0.0, -margin)) + 0.5 * ridge * theta[1:] @ theta[1:]
    r = -y * _sigmoid(-margin) / y.size
    grad = np.concatenate([[r.sum()], x.T @ r + ridge * theta[1:]])
    return loss, grad


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def fit_logistic(
    ds: Dataset,
    feature_indices: Sequence[int],
    max_iters: int = 100,
    tolerance: float = 1e-6,
) -> WeakClassifier:
    """Damped Newton fit; stops when the gradient max-norm drops below ``tolerance``."""
    idx = tuple(int(i) for i in feature_indices)
    if not 1 <= len(idx) <= 2:
        raise DataError("a weak classifier uses one or two features")
    if max(idx) >= ds.n_features:
        raise DataError(f"feature index {max(idx)} out of range for {ds.n_features} columns")
    if ds.n_positive == 0 or ds.n_negative == 0:
        raise DataError("logistic fit needs both classes present")
    x = ds.features[:, idx]
    y = ds.labels.astype(np.float64)
    xt = np.hstack([np.ones((x.shape[0], 1)), x])
    theta = np.zeros(len(idx) + 1)
    loss, grad = logistic_loss(theta, x, y)
    converged = False
    for _ in range(max_iters):
        if np.max(np.abs(grad)) < tolerance:
            converged = True
            break
        p = _sigmoid(theta[0] + x @ theta[1:])
        w = p * (1.0 - p) / y.size
        hess = xt.T @ (xt * w[:, None])
        hess[1:, 1:] += RIDGE * np.eye(len(idx))
        hess += 1e-12 * np.eye(len(idx) + 1)
        step = -np.linalg.solve(hess, grad)
        slope = grad @ step
        t = 1.0
        while True:
            trial = theta + t * step
            trial_loss, trial_grad = logistic_loss(trial, x, y)
            if trial_loss <= loss + 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        if trial_loss > loss:
            break
        theta, loss, grad = trial, trial_loss, trial_grad
    else:
        converged = bool(np.max(np.abs(grad)) < tolerance)
    if not converged:
        warnings.warn(
            f"logistic fit on features {idx} stopped with gradient "
            f"{np.max(np.abs(grad)):.3g} >= {tolerance:.3g}",
            ConvergenceWarning,
            stacklevel=2,
        )
    provisional = WeakClassifier(idx, tuple(theta[1:]), theta[0], 0.5, converged)
    # logit ranks like tanh(z/2) but without saturation ties
    train_auc = auc(provisional.logit(ds.features), ds.labels)
    return WeakClassifier(idx, tuple(theta[1:]), theta[0], train_auc, converged)


def thread_count() -> int:
    """Worker threads from ``CVQBOOST_THREADS`` (0 = all cores, unset = 1)."""
    raw = os.environ.get("CVQBOOST_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"CVQBOOST_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("CVQBOOST_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def candidate_subsets(n_features: int, include_pairs: bool) -> list[tuple[int, ...]]:
    singles = [(i,) for i in range(n_features)]
    pairs = list(combinations(range(n_features), 2)) if include_pairs else []
    return singles + pairs


def build_pool(ds: Dataset, cfg: PoolConfig) -> list[WeakClassifier]:
    """All single-feature (and optionally pair) classifiers, truncated by train AUC.

    When truncating, the top ``max_classifiers`` by train AUC survive (ties go
    to the lexicographically smaller feature tuple) and keep candidate order.
    """
    cfg.validate()
    if ds.n_features < 1:
        raise DataError("dataset has no features")
    candidates = candidate_subsets(ds.n_features, cfg.include_pairs)

    def fit(idx):
        return fit_logistic(ds, idx, cfg.logistic_max_iters, cfg.logistic_tolerance)

    n_threads = thread_count()
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            fitted = list(pool.map(fit, candidates))
    else:
        fitted = [fit(idx) for idx in candidates]

    if len(fitted) <= cfg.max_classifiers:
        return fitted
    ranked = sorted(range(len(fitted)), key=lambda i: (-fitted[i].train_auc, candidates[i]))
    keep = sorted(ranked[: cfg.max_classifiers])
    return [fitted[i] for i in keep]


def predict_matrix(pool: Sequence[WeakClassifier], ds_or_features) -> np.ndarray:
    """S x N matrix whose column i holds pool[i] scores on every row."""
    if not pool:
        raise DataError("empty classifier pool")
    features = getattr(ds_or_features, "features", ds_or_features)
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DataError("features must be 2-D")
    needed = max(max(wc.feature_indices) for wc in pool) + 1
    if features.shape[1] < needed:
        raise DataError(f"pool needs {needed} feature columns, got {features.shape[1]}")
    out = np.empty((features.shape[0], len(pool)))
    for i, wc in enumerate(pool):
        out[:, i] = wc.decision(features)
    return out
