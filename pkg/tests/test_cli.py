import json
import subprocess
import sys

import numpy as np
import pytest

from cvqboost import model as model_mod
from cvqboost.cli import dispatch
from cvqboost.dataset import ScalerParams
from cvqboost.hamiltonian import Hamiltonian, save_json
from cvqboost.weak import WeakClassifier


def _run(capsys, *argv):
    code = dispatch(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def separable(tmp_path, capsys):
    path = tmp_path / "sep.csv"
    code, out, _ = _run(capsys, "generate", "--n-samples", "800", "--n-features", "4",
                        "--n-informative", "2", "--class-sep", "10", "--minority-fraction", "0.3",
                        "--flip-fraction", "0", "--seed", "2", "--out", str(path))
    assert code == 0 and out == ""
    return path


def _inspect_rows(out):
    return [l for l in out.splitlines() if l[:4].strip().isdigit()]


def test_help_exits_zero(capsys):
    code, out, _ = _run(capsys, "--help")
    assert code == 0 and "usage" in out
    assert _run(capsys, "train", "--help")[0] == 0


def test_usage_errors_exit_one(capsys):
    code, out, err = _run(capsys, "frobnicate")
    assert code == 1 and "usage" in err and out == ""
    assert _run(capsys)[0] == 1
    assert _run(capsys, "solve", "--input", "x.json", "--out", "y", "--bogus")[0] == 1
    code, _, err = _run(capsys, "bench", "--axis", "train-count", "--values", "10,5", "--out", "r.csv")
    assert code == 1 and "usage" in err


def test_runtime_failure_exits_two(capsys, tmp_path):
    code, out, err = _run(capsys, "solve", "--input", str(tmp_path / "none.json"),
                          "--out", str(tmp_path / "s.json"))
    assert code == 2 and "none.json" in err and out == ""
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert _run(capsys, "inspect", "--model", str(bad))[0] == 2


def test_train_evaluate_separable(capsys, tmp_path, separable):
    m, hold, ev = tmp_path / "m.json", tmp_path / "hold.csv", tmp_path / "e.json"
    code, out, _ = _run(capsys, "train", "--input", str(separable), "--train-fraction", "0.8",
                        "--stratify", "--holdout-out", str(hold), "--restarts", "2",
                        "--out", str(m), "-v")
    assert code == 0 and out == ""
    code, out, _ = _run(capsys, "evaluate", "--model", str(m), "--input", str(hold),
                        "--metric", "auc,accuracy", "--out", str(ev))
    assert code == 0 and out == ""
    result = json.loads(ev.read_text())
    assert result["auc"] >= 0.95
    preds = tmp_path / "p.csv"
    assert _run(capsys, "predict", "--model", str(m), "--input", str(hold), "--output", str(preds))[0] == 0
    lines = preds.read_text().splitlines()
    assert lines[0] == "score,label" and len(lines) == 161
    assert {l.split(",")[1] for l in lines[1:]} <= {"1", "-1"}


def test_config_precedence(capsys, tmp_path, separable):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambda": 5.0, "pool": {"include_pairs": False},
                               "solver": {"restarts": 1}}))
    m = tmp_path / "m.json"
    assert _run(capsys, "train", "--input", str(separable), "--config", str(cfg),
                "--lambda", "2", "--out", str(m))[0] == 0
    loaded = model_mod.load(m)
    assert loaded.lam == 2.0 and len(loaded.pool) == 4
    assert loaded.metadata["config"]["solver"]["restarts"] == 1
    cfg.write_text(json.dumps({"lambada": 1}))
    assert _run(capsys, "train", "--input", str(separable), "--config", str(cfg),
                "--out", str(m))[0] == 1


def test_lambda_list_tunes(capsys, tmp_path, separable):
    m = tmp_path / "m.json"
    assert _run(capsys, "train", "--input", str(separable), "--lambda", "0.1,1,10",
                "--restarts", "1", "--no-pairs", "--out", str(m))[0] == 0
    assert "lambda_search" in model_mod.load(m).metadata


def test_solve_with_trace(capsys, tmp_path):
    ham = tmp_path / "h.json"
    save_json(Hamiltonian(np.eye(2), [0.0, 0.0]), ham)
    out, trace = tmp_path / "s.json", tmp_path / "t.csv"
    code, stdout, _ = _run(capsys, "solve", "--input", str(ham), "--backend", "projected_gradient",
                           "--seed", "1", "--emulate-db", "23", "--trace", str(trace), "--out", str(out))
    assert code == 0 and stdout == ""
    doc = json.loads(out.read_text())
    assert doc["weights"] == pytest.approx([0.5, 0.5], abs=1e-6)
    assert trace.read_text().startswith("iteration,energy\n")


def test_generate_hamiltonian(capsys, tmp_path):
    path = tmp_path / "h.json"
    assert _run(capsys, "generate", "--hamiltonian-size", "7", "--n-samples", "300",
                "--out", str(path))[0] == 0
    assert json.loads(path.read_text())["n"] == 7


def test_bench_writes_report(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, stdout, _ = _run(capsys, "bench", "--axis", "hamiltonian-size", "--values", "5,10",
                           "--repeats", "3", "--n-samples", "300", "--out", str(out))
    assert code == 0 and stdout == ""
    assert [r["value"] for r in json.loads(out.read_text())["rows"]] == [5, 10]


def _save_toy(path, weights):
    pool = tuple(WeakClassifier((i % 3,), (1.0 + i,), 0.0) for i in range(len(weights)))
    m = model_mod.Model(pool, np.array(weights), ScalerParams(np.zeros(3), np.ones(3)),
                        feature_names=("a", "b", "c"))
    model_mod.save(m, path)


def test_inspect(capsys, tmp_path):
    p = tmp_path / "m.json"
    _save_toy(p, [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    code, out, _ = _run(capsys, "inspect", "--model", str(p))
    rows = _inspect_rows(out)
    assert code == 0 and len(rows) == 7
    assert rows[0].split()[1] == "1.0000000000" and "c" in rows[0]
    _save_toy(p, [0.05, 0.1, 0.15, 0.2, 0.25, 0.1, 0.15])
    code, out, _ = _run(capsys, "inspect", "--model", str(p), "--top", "5")
    assert len(_inspect_rows(out)) == 5
    _, out, _ = _run(capsys, "inspect", "--model", str(p))
    assert sum(float(r.split()[1]) for r in _inspect_rows(out)) == pytest.approx(1.0, abs=1e-6)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cvqboost", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "generate" in res.stdout
    res = subprocess.run([sys.executable, "-m", "cvqboost", "nope"], capture_output=True, text=True)
    assert res.returncode == 1 and res.stdout == ""
