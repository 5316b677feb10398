"""Training-set rebalancing: majority downsampling, SMOTE and ADASYN.

All neighbor queries are exact Euclidean k-NN; run these on standardized
features. Oversamplers append synthetic minority rows after the originals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError

STRATEGIES = ("downsample", "smote", "adasyn")

# rows per block when building distance matrices
_KNN_BLOCK = 1024


@dataclass(frozen=True)
class BalanceConfig:
    strategy: str = "smote"
    target_ratio: float = 1.0
    k_neighbors: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f"unknown balancing strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if not 0 < self.target_ratio <= 1:
            raise ConfigError(f"target_ratio must lie in (0, 1], got {self.target_ratio}")
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be >= 1")


def _classes(ds: Dataset) -> tuple[int, np.ndarray, np.ndarray]:
    """(minority label, minority indices, majority indices)."""
    pos = np.flatnonzero(ds.labels == 1)
    neg = np.flatnonzero(ds.labels == -1)
    if pos.size == 0 or neg.size == 0:
        raise DataError("balancing needs both classes present")
    if pos.size <= neg.size:
        return 1, pos, neg
    return -1, neg, pos


def _synthetic_count(target_ratio: float, n_minority: int, n_majority: int) -> int:
    return math.ceil(target_ratio * n_majority - 1e-9) - n_minority


def downsample_majority(ds: Dataset, cfg: BalanceConfig) -> Dataset:
    """Drop majority rows (without replacement) until minority/majority hits the target."""
    cfg.validate()
    _, minority, majority = _classes(ds)
    current = minority.size / majority.size
    if cfg.target_ratio < current * (1 - 1e-12):
        raise ConfigError(
            f"target_ratio {cfg.target_ratio} is below the current ratio {current:.6g}; "
            "downsampling cannot reduce balance"
        )
    keep = min(majority.size, max(1, int(math.floor(minority.size / cfg.target_ratio + 0.5))))
    rng = np.random.default_rng(cfg.seed)
    kept = rng.choice(majority, size=keep, replace=False)
    return ds.subset(np.sort(np.concatenate([minority, kept])))


def knn_indices(points: np.ndarray, queries: np.ndarray, k: int, exclude=None) -> np.ndarray:
    """Indices into ``points`` of the k nearest neighbors of each query row.

    ``exclude[q]`` (optional) is a point index that query q may not return,
    used to drop a query's own row. Neighbors come back sorted by distance,
    ties broken by lower index.
    """
    points = np.asarray(points, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    if k > points.shape[0] - (exclude is not None):
        raise DataError(f"k={k} neighbors requested from {points.shape[0]} points")
    sq_points = np.einsum("ij,ij->i", points, points)
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    for start in range(0, queries.shape[0], _KNN_BLOCK):
        q = queries[start:start + _KNN_BLOCK]
        d2 = np.einsum("ij,ij->i", q, q)[:, None] - 2.0 * q @ points.T + sq_points[None, :]
        if exclude is not None:
            rows = np.arange(q.shape[0])
            d2[rows, exclude[start:start + q.shape[0]]] = np.inf
        # stable sort keeps the lower index first among equal distances
        out[start:start + q.shape[0]] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def _check_oversampling(cfg: BalanceConfig, n_minority: int) -> None:
    cfg.validate()
    if n_minority <= cfg.k_neighbors:
        raise DataError(
            f"minority class has {n_minority} samples; needs more than "
            f"k_neighbors={cfg.k_neighbors}"
        )


def _interpolate(ds, minority, neighbors, owners, rng) -> np.ndarray:
    """One synthetic row per entry of ``owners`` (positions into ``minority``)."""
    x_min = ds.features[minority]
    pick = rng.integers(0, neighbors.shape[1], size=owners.size)
    partner = neighbors[owners, pick]
    u = rng.uniform(0.0, 1.0, size=(owners.size, 1))
    return x_min[owners] + u * (x_min[partner] - x_min[owners])


def _append(ds: Dataset, rows: np.ndarray, label: int) -> Dataset:
    features = np.vstack([ds.features, rows])
    labels = np.concatenate([ds.labels, np.full(rows.shape[0], label, dtype=np.int64)])
    return Dataset(features, labels, ds.feature_names)


def smote(ds: Dataset, cfg: BalanceConfig) -> Dataset:
    """Synthetic minority oversampling by interpolation toward minority neighbors."""
    label, minority, majority = _classes(ds)
    _check_oversampling(cfg, minority.size)
    n_new = _synthetic_count(cfg.target_ratio, minority.size, majority.size)
    if n_new <= 0:
        return ds
    x_min = ds.features[minority]
    neighbors = knn_indices(x_min, x_min, cfg.k_neighbors, exclude=np.arange(minority.size))
    rng = np.random.default_rng(cfg.seed)
    owners = rng.integers(0, minority.size, size=n_new)
    return _append(ds, _interpolate(ds, minority, neighbors, owners, rng), label)


def largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer apportionment of ``total`` proportional to ``weights``."""
    weights = np.asarray(weights, dtype=np.float64)
    quota = weights / weights.sum() * total
    base = np.floor(quota).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        # largest fractional part first, lower index on ties
        order = np.lexsort((np.arange(weights.size), -(quota - base)))
        base[order[:short]] += 1
    return base


def adasyn_budgets(ds: Dataset, cfg: BalanceConfig) -> np.ndarray:
    """Synthetic-sample budget per minority row (in minority-index order)."""
    _, minority, majority = _classes(ds)
    _check_oversampling(cfg, minority.size)
    n_new = max(0, _synthetic_count(cfg.target_ratio, minority.size, majority.size))
    if n_new == 0:
        return np.zeros(minority.size, dtype=np.int64)
    nn = knn_indices(ds.features, ds.features[minority], cfg.k_neighbors, exclude=minority)
    hardness = (ds.labels[nn] != ds.labels[minority][:, None]).sum(axis=1) / cfg.k_neighbors
    if hardness.sum() == 0:
        hardness = np.ones(minority.size)
    return largest_remainder(hardness, n_new)


def adasyn(ds: Dataset, cfg: BalanceConfig) -> Dataset:
    """Adaptive synthetic sampling: more synthetic rows near majority-heavy regions."""
    label, minority, majority = _classes(ds)
    budgets = adasyn_budgets(ds, cfg)
    if budgets.sum() == 0:
        return ds
    x_min = ds.features[minority]
    neighbors = knn_indices(x_min, x_min, cfg.k_neighbors, exclude=np.arange(minority.size))
    rng = np.random.default_rng(cfg.seed)
    owners = np.repeat(np.arange(minority.size), budgets)
    return _append(ds, _interpolate(ds, minority, neighbors, owners, rng), label)


def balance(ds: Dataset, cfg: BalanceConfig | None) -> Dataset:
    if cfg is None:
        return ds
    cfg.validate()
    if cfg.strategy == "downsample":
        return downsample_majority(ds, cfg)
    if cfg.strategy == "smote":
        return smote(ds, cfg)
    return adasyn(ds, cfg)
