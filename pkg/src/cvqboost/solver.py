"""Minimize w^T J w + C^T w over the scaled simplex {w >= 0, sum(w) = R}.

Backends
--------
dissipative
    Multiplicative-weights (exponentiated gradient) flow. Mass drains away
    from high-gradient coordinates, a classical stand-in for hardware that
    relaxes toward low-energy states.
projected_gradient
    Euclidean projected gradient with backtracking; monotone.
frank_wolfe
    Away-step conditional gradient: each step moves toward the best simplex
    vertex or away from the worst active one, with exact line search on the
    quadratic; monotone.
brute_force
    Exhaustive search over the grid {c * R/d : c a composition of d}.

Iterative backends run ``restarts`` starts drawn from Dirichlet(1) and keep
the lowest energy (lowest restart index on ties).
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from numba import njit

from .errors import ConfigError, SolverError
from .hamiltonian import Hamiltonian, energy, load_json, quantize_to_range

BACKENDS = ("dissipative", "projected_gradient", "frank_wolfe", "brute_force")

WINDOW = 10
_MAX_HALVINGS = 60
# full J @ w refresh period for the rank-one updates in Frank-Wolfe
_FW_REFRESH = 50

RUNNING, CONVERGED, DIVERGED = 0, 1, 2


@dataclass(frozen=True)
class SolverConfig:
    backend: str = "dissipative"
    max_iters: int = 5000
    tolerance: float = 1e-8
    restarts: int = 10
    seed: int = 0
    emulate_range_db: Optional[float] = None
    grid_resolution: int = 60
    max_grid_points: int = 10_000_000
    early_stop: bool = True

    def validate(self) -> None:
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be > 0")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.emulate_range_db is not None and not self.emulate_range_db > 0:
            raise ConfigError("emulate_range_db must be positive when set")
        if self.grid_resolution < 1:
            raise ConfigError("grid_resolution must be >= 1")


@dataclass
class Solution:
    weights: np.ndarray
    energy: float
    boost_loss: float
    iterations: int
    trace: np.ndarray = field(repr=False)
    converged: bool
    backend: str = ""
    restart: int = 0
    solved_energy: float = math.nan
    elapsed_s: float = 0.0

    def to_dict(self, include_trace: bool = False) -> dict:
        doc = {
            "weights": self.weights.tolist(),
            "energy": self.energy,
            "boost_loss": self.boost_loss,
            "iterations": self.iterations,
            "converged": self.converged,
            "backend": self.backend,
            "restart": self.restart,
            "solved_energy": self.solved_energy,
            "elapsed_s": self.elapsed_s,
        }
        if include_trace:
            doc["trace"] = self.trace.tolist()
        return doc


@njit(cache=True)
def _project(v, R):
    n = v.size
    total = 0.0
    nonneg = True
    for i in range(n):
        total += v[i]
        if v[i] < 0.0:
            nonneg = False
    if nonneg and abs(total - R) <= 1e-15 * R:
        return v.copy()
    u = np.sort(v)[::-1]
    css = 0.0
    tau = 0.0
    for k in range(n):
        css += u[k]
        t = (css - R) / (k + 1)
        if u[k] - t > 0.0:
            tau = t
    return np.maximum(v - tau, 0.0)


def project_simplex(v, R: float = 1.0) -> np.ndarray:
    """Euclidean projection of ``v`` onto {w >= 0, sum(w) = R}."""
    v = np.ascontiguousarray(v, dtype=np.float64).reshape(-1)
    if v.size < 1:
        raise ConfigError("cannot project an empty vector")
    if not R > 0:
        raise ConfigError("sum constraint must be positive")
    return _project(v, float(R))


@njit(cache=True)
def _window_done(trace, it, tol):
    if it < WINDOW:
        return False
    e = trace[it]
    return abs(trace[it - WINDOW] - e) <= tol * max(1.0, abs(e))


@njit(cache=True)
def _dissipative(J, C, R, w, max_iters, tol, early_stop):
    trace = np.empty(max_iters + 1)
    Jw = np.dot(J, w)
    E = w @ Jw + C @ w
    trace[0] = E
    if not np.isfinite(E):
        return w, trace[:1], 0, DIVERGED
    w_new, Jw_new, E_new = w, Jw, E
    g = 2.0 * Jw + C
    spread = g.max() - g.min()
    eta = 1.0 / spread if spread > 0.0 else 1.0
    it = 0
    status = RUNNING
    while it < max_iters:
        accepted = False
        for _ in range(_MAX_HALVINGS):
            z = w * np.exp(-eta * (g - g.min()))
            s = z.sum()
            if s > 0.0 and np.isfinite(s):
                w_new = z * (R / s)
                Jw_new = np.dot(J, w_new)
                E_new = w_new @ Jw_new + C @ w_new
                if not np.isfinite(E_new):
                    return w, trace[: it + 1], it, DIVERGED
                if E_new <= E:
                    accepted = True
                    break
            eta *= 0.5
        if not accepted:
            status = CONVERGED
            break
        it += 1
        w, Jw, E = w_new, Jw_new, E_new
        g = 2.0 * Jw + C
        trace[it] = E
        eta *= 1.5
        if early_stop and _window_done(trace, it, tol):
            status = CONVERGED
            break
    return w, trace[: it + 1], it, status


@njit(cache=True)
def _projected_gradient(J, C, R, w, max_iters, tol, early_stop):
    trace = np.empty(max_iters + 1)
    Jw = np.dot(J, w)
    E = w @ Jw + C @ w
    trace[0] = E
    if not np.isfinite(E):
        return w, trace[:1], 0, DIVERGED
    # 2 * max absolute row sum bounds the gradient's Lipschitz constant
    lip = 2.0 * np.abs(J).sum(axis=1).max()
    w_new, Jw_new, E_new = w, Jw, E
    eta_safe = 1.0 / lip if lip > 0.0 else 1.0
    eta = eta_safe
    it = 0
    status = RUNNING
    while it < max_iters:
        g = 2.0 * Jw + C
        accepted = False
        for _ in range(_MAX_HALVINGS):
            w_new = _project(w - eta * g, R)
            d = w_new - w
            dd = d @ d
            if dd == 0.0:
                break
            Jw_new = np.dot(J, w_new)
            E_new = w_new @ Jw_new + C @ w_new
            if not np.isfinite(E_new):
                return w, trace[: it + 1], it, DIVERGED
            if E_new <= E and E_new <= E + g @ d + dd / (2.0 * eta):
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            status = CONVERGED
            break
        it += 1
        w, Jw, E = w_new, Jw_new, E_new
        trace[it] = E
        eta *= 2.0
        if early_stop and _window_done(trace, it, tol):
            status = CONVERGED
            break
    return w, trace[: it + 1], it, status


@njit(cache=True)
def _frank_wolfe(J, C, R, w, max_iters, tol, early_stop):
    trace = np.empty(max_iters + 1)
    Jw = np.dot(J, w)
    E = w @ Jw + C @ w
    trace[0] = E
    if not np.isfinite(E):
        return w, trace[:1], 0, DIVERGED
    it = 0
    status = RUNNING
    while it < max_iters:
        g = 2.0 * Jw + C
        gw = g @ w
        # toward vertex: d = R e_k - w
        k = np.argmin(g)
        gd_fw = R * g[k] - gw
        # away from the worst active vertex: d = w - R e_a
        a = -1
        for i in range(w.size):
            if w[i] > 0.0 and (a < 0 or g[i] > g[a]):
                a = i
        gd_away = gw - R * g[a]
        if gd_fw >= 0.0 and gd_away >= 0.0:
            status = CONVERGED
            break
        if gd_fw <= gd_away:
            gd = gd_fw
            Jd = R * J[:, k] - Jw
            dJd = R * Jd[k] - w @ Jd
            gamma_max = 1.0
        else:
            gd = gd_away
            Jd = Jw - R * J[:, a]
            dJd = w @ Jd - R * Jd[a]
            gamma_max = w[a] / (R - w[a]) if w[a] < R else np.inf
        gamma = gamma_max
        if dJd > 0.0:
            gamma = min(gamma_max, -gd / (2.0 * dJd))
        if not np.isfinite(gamma):
            status = CONVERGED
            break
        if gd_fw <= gd_away:
            w_new = (1.0 - gamma) * w
            w_new[k] += gamma * R
        else:
            w_new = (1.0 + gamma) * w
            w_new[a] -= gamma * R
            if gamma == gamma_max:
                w_new[a] = 0.0
            w_new = np.maximum(w_new, 0.0)
        if (it + 1) % _FW_REFRESH == 0:
            Jw_new = np.dot(J, w_new)
        else:
            Jw_new = Jw + gamma * Jd
        E_new = w_new @ Jw_new + C @ w_new
        if not np.isfinite(E_new):
            return w, trace[: it + 1], it, DIVERGED
        if not E_new <= E:
            status = CONVERGED
            break
        it += 1
        w, Jw, E = w_new, Jw_new, E_new
        trace[it] = E
        if early_stop and _window_done(trace, it, tol):
            status = CONVERGED
            break
    return w, trace[: it + 1], it, status


@njit(cache=True)
def _grid_search(J, C, d, R):
    n = C.size
    c = np.zeros(n, dtype=np.int64)
    c[0] = d
    scale = R / d
    w = np.empty(n)
    best = np.inf
    best_c = c.copy()
    count = 0
    while True:
        for i in range(n):
            w[i] = c[i] * scale
        e = w @ np.dot(J, w) + C @ w
        count += 1
        if e < best:
            best = e
            best_c[:] = c
        j = -1
        for i in range(n - 2, -1, -1):
            if c[i] > 0:
                j = i
                break
        if j < 0:
            break
        tail = c[n - 1]
        c[n - 1] = 0
        c[j] -= 1
        c[j + 1] = tail + 1
    return best_c * scale, best, count


_KERNELS = {
    "dissipative": _dissipative,
    "projected_gradient": _projected_gradient,
    "frank_wolfe": _frank_wolfe,
}


def grid_size(n: int, d: int) -> int:
    """Number of grid points (compositions of d into n parts)."""
    return math.comb(d + n - 1, n - 1)


def _finalize(w, R):
    w = _project(np.ascontiguousarray(w, dtype=np.float64), R)
    return w * (R / w.sum())


def solve(ham: Hamiltonian, cfg: SolverConfig = SolverConfig()) -> Solution:
    cfg.validate()
    t0 = time.perf_counter()
    target = ham if cfg.emulate_range_db is None else quantize_to_range(ham, cfg.emulate_range_db)
    J = np.ascontiguousarray(target.J)
    C = np.ascontiguousarray(target.C)
    R = ham.sum_constraint
    n = ham.n

    if n == 1:
        w = np.array([R])
        e_solved = energy(target, w)
        best = (w, e_solved, np.array([[0.0, e_solved]]), 0, True, 0)
    elif cfg.backend == "brute_force":
        points = grid_size(n, cfg.grid_resolution)
        if points > cfg.max_grid_points:
            raise ConfigError(
                f"grid of {points} points exceeds the cap of {cfg.max_grid_points}; "
                "lower grid_resolution or use an iterative backend"
            )
        w, e_solved, count = _grid_search(J, C, cfg.grid_resolution, R)
        w = _finalize(w, R)
        e_solved = energy(target, w)
        best = (w, e_solved, np.array([[0.0, e_solved]]), int(count), True, 0)
    else:
        kernel = _KERNELS[cfg.backend]
        rng = np.random.default_rng(cfg.seed)
        starts = rng.dirichlet(np.ones(n), size=cfg.restarts) * R
        best = None
        for r, w0 in enumerate(starts):
            w, trace, iters, status = kernel(
                J, C, R, np.ascontiguousarray(w0), cfg.max_iters, cfg.tolerance, cfg.early_stop
            )
            if status == DIVERGED:
                raise SolverError(
                    f"{cfg.backend} diverged: non-finite energy on restart {r} "
                    f"after {iters} iterations"
                )
            w = _finalize(w, R)
            e_solved = energy(target, w)
            if best is None or e_solved < best[1]:
                steps = np.column_stack([np.arange(trace.size, dtype=np.float64), trace])
                best = (w, e_solved, steps, int(iters), status == CONVERGED, r)

    w, e_solved, steps, iters, converged, restart = best
    e = energy(ham, w)
    if not math.isfinite(e):
        raise SolverError(f"{cfg.backend} diverged: non-finite final energy")
    return Solution(
        weights=w,
        energy=e,
        boost_loss=e + ham.offset,
        iterations=iters,
        trace=steps,
        converged=bool(converged),
        backend=cfg.backend,
        restart=restart,
        solved_energy=e_solved,
        elapsed_s=time.perf_counter() - t0,
    )


def solve_file(path, cfg: SolverConfig = SolverConfig()) -> Solution:
    return solve(load_json(path), cfg)


def save_solution(sol: Solution, path, include_trace: bool = False) -> None:
    Path(path).write_text(json.dumps(sol.to_dict(include_trace), indent=2), encoding="utf-8")


def save_trace_csv(sol: Solution, path) -> None:
    lines = ["iteration,energy"]
    lines += [f"{int(i)},{float(e)!r}" for i, e in sol.trace]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
