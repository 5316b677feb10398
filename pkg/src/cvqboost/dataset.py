"""Labeled datasets: CSV ingestion, synthetic generation, splitting and scaling.

Labels are kept in {-1, +1} everywhere inside the package. Inputs using
{0, 1} (or any other two-valued coding) are converted at the boundary.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError

# std below this (relative to the column scale) marks a column as constant
_DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with +/-1 labels and column names."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {x.shape}")
        y = np.asarray(self.labels)
        if y.ndim != 1:
            raise DataError(f"labels must be 1-D, got shape {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise DataError(
                f"row count {x.shape[0]} does not match label count {y.shape[0]}"
            )
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError(f"dataset must have at least one row and column, got {x.shape}")
        if not np.all((y == 1) | (y == -1)):
            raise DataError("labels must be exactly -1 or +1")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain non-finite values")
        names = tuple(self.feature_names) or tuple(f"f{i}" for i in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataError(f"{len(names)} feature names for {x.shape[1]} columns")
        x.setflags(write=False)
        y = y.astype(np.int64)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_positive(self) -> int:
        return int(np.count_nonzero(self.labels == 1))

    @property
    def n_negative(self) -> int:
        return int(np.count_nonzero(self.labels == -1))

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(self.features[index], self.labels[index], self.feature_names)

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.labels, self.feature_names)


@dataclass(frozen=True)
class ScalerParams:
    means: np.ndarray
    std_devs: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.std_devs, dtype=np.float64)
        if means.shape != stds.shape or means.ndim != 1:
            raise DataError("scaler means and std_devs must be 1-D of equal length")
        if not np.all(stds > 0):
            raise DataError("scaler std_devs must be strictly positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "std_devs", stds)


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for :func:`generate_synthetic`.

    The minority class is labeled +1.
    """

    n_samples: int
    n_features: int
    n_informative: int
    class_sep: float = 1.0
    minority_fraction: float = 0.5
    flip_fraction: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_samples < 1 or self.n_features < 1 or self.n_informative < 1:
            raise ConfigError("n_samples, n_features and n_informative must be positive")
        if self.n_informative > self.n_features:
            raise ConfigError("n_informative must not exceed n_features")
        if not self.class_sep > 0:
            raise ConfigError("class_sep must be positive")
        if not 0 < self.minority_fraction <= 0.5:
            raise ConfigError("minority_fraction must lie in (0, 0.5]")
        if not 0 <= self.flip_fraction < 0.5:
            raise ConfigError("flip_fraction must lie in [0, 0.5)")
        if _floor(self.minority_fraction * self.n_samples) < 1:
            raise ConfigError("minority_fraction * n_samples must be at least 1")


def _floor(x: float) -> int:
    # guards products like 0.29 * 100 = 28.999999999999996
    return int(math.floor(x + 1e-9))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def to_pm1(labels, positive=1) -> np.ndarray:
    """Map arbitrary two-valued labels to +1 (== positive) / -1."""
    labels = np.asarray(labels)
    return np.where(labels == positive, 1, -1).astype(np.int64)


def load_csv(path, label_column: str, positive_label: str = "1") -> Dataset:
    """Read a headed CSV file; every column except ``label_column`` is a feature."""
    header, rows = read_csv_table(path)
    if label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not found in header")
    label_idx = header.index(label_column)
    feature_cols = [i for i in range(len(header)) if i != label_idx]
    if not feature_cols:
        raise DataError(f"{path}: no feature columns besides {label_column!r}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    x = parse_feature_rows(path, header, rows, feature_cols)
    positive_label = positive_label.strip()
    y = np.array(
        [1 if row[label_idx].strip() == positive_label else -1 for row in rows],
        dtype=np.int64,
    )
    return Dataset(x, y, tuple(header[i] for i in feature_cols))


def read_csv_table(path) -> tuple[list[str], list[list[str]]]:
    """Return (header, rows) from a CSV file; rows are raw strings."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {lineno} has {len(row)} cells, header has {len(header)}"
                )
            rows.append(row)
    return header, rows


def parse_feature_rows(path, header, rows, columns) -> np.ndarray:
    x = np.empty((len(rows), len(columns)), dtype=np.float64)
    for r, row in enumerate(rows):
        for c, col in enumerate(columns):
            cell = row[col]
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                raise DataError(
                    f"{path}: data row {r + 1}, column {header[col]!r}: "
                    f"cannot parse {cell!r} as a finite number"
                )
            x[r, c] = value
    return x


def save_csv(ds: Dataset, path, label_column: str = "Class") -> None:
    """Write ``ds`` with labels coded 1 (positive) / 0 (negative)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*ds.feature_names, label_column])
        for row, label in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + ["1" if label == 1 else "0"])


def split_indices(labels, train_fraction: float, seed: int, stratified: bool = False):
    """Index arrays (train, test), each in ascending order."""
    labels = np.asarray(labels)
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    if stratified:
        train_parts = []
        for cls in (-1, 1):
            idx = np.flatnonzero(labels == cls)
            idx = idx[rng.permutation(idx.size)]
            train_parts.append(idx[: _round_half_up(train_fraction * idx.size)])
        train = np.concatenate(train_parts)
    else:
        perm = rng.permutation(labels.size)
        train = perm[: _round_half_up(train_fraction * labels.size)]
    mask = np.zeros(labels.size, dtype=bool)
    mask[train] = True
    train, test = np.flatnonzero(mask), np.flatnonzero(~mask)
    if train.size == 0 or test.size == 0:
        raise ConfigError(
            f"train_fraction {train_fraction} leaves an empty partition "
            f"for {labels.size} samples"
        )
    return train, test


def train_test_split(
    ds: Dataset, train_fraction: float, seed: int, stratified: bool = False
) -> tuple[Dataset, Dataset]:
    train, test = split_indices(ds.labels, train_fraction, seed, stratified)
    return ds.subset(train), ds.subset(test)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Two-class Gaussian data in the style of ``make_classification``.

    Class centers sit at +/- class_sep/2 on every informative axis; the other
    columns are random linear mixes of the informative ones plus unit noise.
    Informative columns come first. Minority (+1) count before label flips is
    exactly floor(minority_fraction * n_samples).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, n_inf = spec.n_samples, spec.n_informative
    n_red = spec.n_features - n_inf

    y = -np.ones(n, dtype=np.int64)
    y[: _floor(spec.minority_fraction * n)] = 1
    y = y[rng.permutation(n)]

    x_inf = rng.standard_normal((n, n_inf)) + (0.5 * spec.class_sep) * y[:, None]
    mixing = rng.uniform(-1.0, 1.0, size=(n_inf, n_red))
    x_red = x_inf @ mixing + rng.standard_normal((n, n_red))
    x = np.hstack([x_inf, x_red])

    n_flip = _floor(spec.flip_fraction * n)
    if n_flip:
        flip = rng.choice(n, size=n_flip, replace=False)
        y[flip] = -y[flip]
    names = tuple(f"inf{i}" for i in range(n_inf)) + tuple(f"red{i}" for i in range(n_red))
    return Dataset(x, y, names)


def fit_scaler(features: np.ndarray) -> ScalerParams:
    x = np.asarray(features, dtype=np.float64)
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    degenerate = stds <= _DEGENERATE_STD * np.maximum(1.0, np.abs(means))
    # constant columns pass through untouched
    means = np.where(degenerate, 0.0, means)
    stds = np.where(degenerate, 1.0, stds)
    return ScalerParams(means, stds)


def apply_scaler(ds: Dataset, params: ScalerParams) -> Dataset:
    if params.means.size != ds.n_features:
        raise DataError(
            f"scaler has {params.means.size} columns, dataset has {ds.n_features}"
        )
    return ds.with_features(scale_features(ds.features, params))


def scale_features(features: np.ndarray, params: ScalerParams) -> np.ndarray:
    return (np.asarray(features, dtype=np.float64) - params.means) / params.std_devs


def standardize(ds: Dataset) -> tuple[Dataset, ScalerParams]:
    """Zero-mean, unit-variance columns (population variance)."""
    params = fit_scaler(ds.features)
    return apply_scaler(ds, params), params


def class_ratio(labels: Sequence[int]) -> float:
    """Minority-to-majority count ratio."""
    labels = np.asarray(labels)
    pos = int(np.count_nonzero(labels == 1))
    neg = labels.size - pos
    lo, hi = min(pos, neg), max(pos, neg)
    return lo / hi if hi else 0.0
