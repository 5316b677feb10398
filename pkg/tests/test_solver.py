import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqboost.errors import ConfigError, SchemaError
from cvqboost.hamiltonian import Hamiltonian, assemble, energy, save_json
from cvqboost.solver import (
    BACKENDS,
    SolverConfig,
    grid_size,
    project_simplex,
    save_solution,
    save_trace_csv,
    solve,
    solve_file,
)

ITERATIVE = ("dissipative", "projected_gradient", "frank_wolfe")


def _random_ham(rng, n, R=1.0):
    a = rng.uniform(-2, 2, size=(n, n))
    j = np.tril(a) + np.tril(a, -1).T
    return Hamiltonian(j, rng.uniform(-2, 2, size=n), sum_constraint=R)


def _grid_min(ham, d=60):
    """Independent enumeration of the d-grid on the simplex."""
    best = np.inf
    n, R = ham.n, ham.sum_constraint
    for cut in itertools.combinations(range(d + n - 1), n - 1):
        parts = np.diff([-1, *cut, d + n - 1]) - 1
        best = min(best, energy(ham, parts * (R / d)))
    return best


def test_project_examples():
    np.testing.assert_array_equal(project_simplex([0.2, 0.2]), [0.5, 0.5])
    np.testing.assert_array_equal(project_simplex([1.5, 0.5]), [1.0, 0.0])
    v = np.array([0.25, 0.75])
    np.testing.assert_array_equal(project_simplex(v), v)


def _kkt_oracle(v, R):
    """Projection by enumerating active sets."""
    n = v.size
    best, best_d = None, np.inf
    for k in range(1, n + 1):
        for support in itertools.combinations(range(n), k):
            s = list(support)
            tau = (v[s].sum() - R) / k
            w = np.zeros(n)
            w[s] = v[s] - tau
            if np.all(w >= -1e-12):
                d = np.sum((w - v) ** 2)
                if d < best_d:
                    best, best_d = w, d
    return best


@settings(max_examples=200, deadline=None)
@given(
    v=st.lists(st.floats(-10, 10), min_size=1, max_size=6),
    R=st.floats(0.1, 5.0),
)
def test_projection_matches_active_set_oracle(v, R):
    v = np.array(v)
    w = project_simplex(v, R)
    assert np.all(w >= 0)
    assert abs(w.sum() - R) <= 1e-9 * max(1.0, np.abs(v).max())
    np.testing.assert_allclose(w, _kkt_oracle(v, R), atol=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_variable(backend):
    sol = solve(Hamiltonian(np.eye(1) * 3, [5.0], sum_constraint=2.0), SolverConfig(backend=backend))
    assert sol.weights.tolist() == [2.0]


@pytest.mark.parametrize("backend", BACKENDS)
def test_identity_two_variables(backend):
    sol = solve(Hamiltonian(np.eye(2), [0.0, 0.0]), SolverConfig(backend=backend))
    np.testing.assert_allclose(sol.weights, [0.5, 0.5], atol=1e-6)
    assert sol.energy == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("backend", ITERATIVE)
def test_oracle_optimality_small(backend):
    rng = np.random.default_rng(11)
    for _ in range(15):
        ham = _random_ham(rng, 3)
        sol = solve(ham, SolverConfig(backend=backend))
        g = _grid_min(ham)
        assert sol.energy <= g + 1e-3 * (1 + abs(g))


def test_brute_force_matches_enumeration():
    rng = np.random.default_rng(12)
    for _ in range(10):
        ham = _random_ham(rng, 3)
        sol = solve(ham, SolverConfig(backend="brute_force"))
        assert sol.energy == pytest.approx(_grid_min(ham), abs=1e-12)
    assert grid_size(3, 60) == 1891


def test_brute_force_cap():
    ham = Hamiltonian(np.eye(12), np.zeros(12))
    with pytest.raises(ConfigError):
        solve(ham, SolverConfig(backend="brute_force", max_grid_points=1000))


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 10**6),
    n=st.integers(2, 12),
    R=st.sampled_from([1.0, 0.5, 3.0]),
    backend=st.sampled_from(ITERATIVE),
)
def test_feasibility_and_monotone_traces(seed, n, R, backend):
    rng = np.random.default_rng(seed)
    sol = solve(_random_ham(rng, n, R), SolverConfig(backend=backend, restarts=2, seed=seed))
    assert np.all(sol.weights >= 0)
    assert abs(sol.weights.sum() - R) <= 1e-9 * R
    if backend != "dissipative":
        assert np.all(np.diff(sol.trace[:, 1]) <= 0)


def test_determinism():
    rng = np.random.default_rng(3)
    ham = _random_ham(rng, 8)
    for backend in ITERATIVE:
        a = solve(ham, SolverConfig(backend=backend, seed=4))
        b = solve(ham, SolverConfig(backend=backend, seed=4))
        np.testing.assert_array_equal(a.weights, b.weights)
        assert a.energy == b.energy and a.restart == b.restart


def test_restart_selection_is_lowest_energy():
    rng = np.random.default_rng(5)
    ham = _random_ham(rng, 6)
    cfg = SolverConfig(backend="projected_gradient", seed=2)
    multi = solve(ham, SolverConfig(backend="projected_gradient", restarts=6, seed=2))
    single = solve(ham, SolverConfig(backend="projected_gradient", restarts=1, seed=2))
    assert multi.restart in range(6)
    assert multi.energy <= single.energy
    assert cfg.restarts == 10


def test_convergence_flag_and_iterations():
    rng = np.random.default_rng(6)
    h = np.tanh(rng.normal(size=(100, 10)))
    ham = assemble(h, np.where(rng.random(100) < 0.5, 1, -1), 1.0)
    sol = solve(ham, SolverConfig(backend="projected_gradient"))
    assert sol.converged and sol.iterations < 5000
    capped = solve(ham, SolverConfig(backend="dissipative", max_iters=3, restarts=1))
    assert capped.iterations == 3 and not capped.converged


def test_boost_loss_field():
    rng = np.random.default_rng(7)
    h = np.tanh(rng.normal(size=(30, 4)))
    y = np.where(rng.random(30) < 0.5, 1, -1)
    sol = solve(assemble(h, y, 0.5))
    assert sol.boost_loss == pytest.approx(np.sum((h @ sol.weights - y) ** 2) + 0.5 * sol.weights @ sol.weights)


def test_emulation_reports_original_energy():
    ham = Hamiltonian(np.array([[1.0, 1e-5], [1e-5, 1.0]]), [-1e-6, 0.5])
    sol = solve(ham, SolverConfig(backend="projected_gradient", emulate_range_db=10.0))
    assert sol.energy == pytest.approx(energy(ham, sol.weights), abs=1e-15)
    assert sol.solved_energy != sol.energy


@pytest.mark.parametrize("kw", [
    dict(backend="annealing"), dict(max_iters=0), dict(tolerance=0.0),
    dict(restarts=0), dict(emulate_range_db=-3.0),
])
def test_invalid_config(kw):
    with pytest.raises(ConfigError):
        solve(Hamiltonian(np.eye(2), [0.0, 0.0]), SolverConfig(**kw))


def test_solve_file_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    ham = _random_ham(rng, 5)
    save_json(ham, tmp_path / "h.json")
    cfg = SolverConfig(seed=3, restarts=2)
    a, b = solve(ham, cfg), solve_file(tmp_path / "h.json", cfg)
    np.testing.assert_array_equal(a.weights, b.weights)
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(SchemaError):
        solve_file(tmp_path / "bad.json", cfg)


def test_solution_outputs(tmp_path):
    sol = solve(Hamiltonian(np.eye(3), [0.0, -1.0, 0.0]), SolverConfig(restarts=1))
    save_solution(sol, tmp_path / "s.json", include_trace=True)
    doc = json.loads((tmp_path / "s.json").read_text())
    assert {"weights", "energy", "iterations", "converged", "trace"} <= set(doc)
    save_trace_csv(sol, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iteration,energy" and len(lines) == len(sol.trace) + 1


@pytest.mark.slow
def test_pipeline_hamiltonian_900():
    from cvqboost.bench import hamiltonian_for_size
    from cvqboost.dataset import SyntheticSpec

    ham = hamiltonian_for_size(900, SyntheticSpec(2000, 900, 20, 1.5), seed=0)
    sol = solve(ham, SolverConfig(restarts=2, max_iters=2000))
    assert sol.weights.size == 900 and abs(sol.weights.sum() - 1) <= 1e-9
