"""Quadratic boosting objective in solver form.

For prediction matrix ``H`` (S x N, entry h_i(x_s)), labels ``y`` and ridge
strength ``lam``:

    J = H^T H + lam * I,    C = -2 H^T y,    offset = y^T y

so that ``w^T J w + C^T w + offset == |H w - y|^2 + lam |w|^2`` for every w.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DataError, SchemaError

HAMILTONIAN_FIELDS = ("n", "j", "c", "offset", "lambda", "sum_constraint")


@dataclass(frozen=True)
class Hamiltonian:
    J: np.ndarray
    C: np.ndarray
    offset: float = 0.0
    lam: float = 0.0
    sum_constraint: float = 1.0

    def __post_init__(self):
        J = np.asarray(self.J, dtype=np.float64)
        C = np.asarray(self.C, dtype=np.float64).reshape(-1)
        n = C.size
        if n < 1 or J.shape != (n, n):
            raise DataError(f"J must be {n}x{n} to match C, got {J.shape}")
        scale = max(1.0, float(np.max(np.abs(J))) if J.size else 1.0)
        if np.max(np.abs(J - J.T)) > 1e-12 * scale:
            raise DataError("J must be symmetric")
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(C))):
            raise DataError("Hamiltonian coefficients must be finite")
        if self.lam < 0:
            raise DataError("lambda must be non-negative")
        if not self.sum_constraint > 0:
            raise DataError("sum_constraint must be positive")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "sum_constraint", float(self.sum_constraint))

    @property
    def n(self) -> int:
        return self.C.size


def assemble(H, labels, lam: float = 1.0, sum_constraint: float = 1.0) -> Hamiltonian:
    H = np.asarray(H, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != y.size:
        raise DataError(f"prediction matrix {H.shape} does not match {y.size} labels")
    if lam < 0:
        raise DataError("lambda must be non-negative")
    J = H.T @ H
    J = 0.5 * (J + J.T)
    J[np.diag_indices_from(J)] += lam
    C = -2.0 * (H.T @ y)
    return Hamiltonian(J, C, float(y @ y), lam, sum_constraint)


def with_lambda(ham: Hamiltonian, lam: float) -> Hamiltonian:
    """Same data term, different ridge strength."""
    J = ham.J.copy()
    J[np.diag_indices_from(J)] += lam - ham.lam
    return replace(ham, J=J, lam=lam)


def energy(ham: Hamiltonian, w) -> float:
    """w^T J w + C^T w (constant offset excluded)."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != ham.C.shape:
        raise DataError(f"weights have shape {w.shape}, Hamiltonian has n={ham.n}")
    return float(w @ (ham.J @ w) + ham.C @ w)


def boost_loss(H, labels, lam: float, w) -> float:
    """Squared error of the weighted vote plus the ridge penalty."""
    H = np.asarray(H, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if H.shape != (y.size, w.size):
        raise DataError(f"shape mismatch: H {H.shape}, labels {y.size}, weights {w.size}")
    r = H @ w - y
    return float(r @ r + lam * (w @ w))


def _coefficients(ham: Hamiltonian) -> np.ndarray:
    return np.abs(np.concatenate([ham.J.ravel(), ham.C]))


def dynamic_range_db(ham: Hamiltonian) -> float:
    """10*log10 of largest over smallest nonzero coefficient magnitude."""
    mags = _coefficients(ham)
    mags = mags[mags > 0]
    if mags.size == 0:
        raise DataError("dynamic range undefined for an all-zero Hamiltonian")
    return float(10.0 * math.log10(mags.max() / mags.min()))


def quantize_to_range(ham: Hamiltonian, max_db: float) -> Hamiltonian:
    """Raise small nonzero coefficients so the dynamic range fits ``max_db``.

    Magnitudes below max|c| / 10**(max_db/10) are clamped up to that floor
    with their sign kept; zeros stay zero.
    """
    if not max_db > 0:
        raise DataError("max_db must be positive")
    top = float(_coefficients(ham).max())
    if top == 0:
        return ham
    floor = top / 10.0 ** (max_db / 10.0)
    while 10.0 * math.log10(top / floor) > max_db:
        floor = np.nextafter(floor, np.inf)

    def clamp(a):
        small = (a != 0) & (np.abs(a) < floor)
        return np.where(small, np.sign(a) * floor, a)

    J, C = clamp(ham.J), clamp(ham.C)
    if np.array_equal(J, ham.J) and np.array_equal(C, ham.C):
        return ham
    return replace(ham, J=J, C=C)


def to_json_dict(ham: Hamiltonian) -> dict:
    rows, cols = np.tril_indices(ham.n)
    return {
        "n": ham.n,
        "j": ham.J[rows, cols].tolist(),
        "c": ham.C.tolist(),
        "offset": ham.offset,
        "lambda": ham.lam,
        "sum_constraint": ham.sum_constraint,
    }


def from_json_dict(doc, source="<document>") -> Hamiltonian:
    if not isinstance(doc, dict):
        raise SchemaError(f"{source}: top level must be a JSON object")
    missing = [k for k in HAMILTONIAN_FIELDS if k not in doc]
    if missing:
        raise SchemaError(f"{source}: missing field(s) {', '.join(missing)}")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SchemaError(f"{source}: field 'n' must be a positive integer")
    try:
        tri = np.asarray(doc["j"], dtype=np.float64)
        c = np.asarray(doc["c"], dtype=np.float64)
        offset = float(doc["offset"])
        lam = float(doc["lambda"])
        sum_constraint = float(doc["sum_constraint"])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{source}: non-numeric value ({exc})") from None
    if tri.shape != (n * (n + 1) // 2,):
        raise SchemaError(
            f"{source}: field 'j' must hold n(n+1)/2 = {n * (n + 1) // 2} numbers, "
            f"got shape {tri.shape}"
        )
    if c.shape != (n,):
        raise SchemaError(f"{source}: field 'c' must hold n = {n} numbers, got shape {c.shape}")
    J = np.zeros((n, n))
    rows, cols = np.tril_indices(n)
    J[rows, cols] = tri
    J[cols, rows] = tri
    try:
        return Hamiltonian(J, c, offset, lam, sum_constraint)
    except DataError as exc:
        raise SchemaError(f"{source}: {exc}") from None


def save_json(ham: Hamiltonian, path) -> None:
    Path(path).write_text(json.dumps(to_json_dict(ham)), encoding="utf-8")


def load_json(path) -> Hamiltonian:
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
