import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqboost.dataset import Dataset
from cvqboost.errors import DataError
from cvqboost.weak import (
    RIDGE,
    ConvergenceWarning,
    PoolConfig,
    WeakClassifier,
    build_pool,
    candidate_subsets,
    evaluate,
    fit_logistic,
    logistic_loss,
    predict_matrix,
)


def _random_ds(n=200, f=4, seed=0, signal=1.0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, f))
    z = signal * (x[:, 0] - 0.5 * x[:, 1]) + rng.normal(size=n)
    y = np.where(z > 0, 1, -1)
    return Dataset(x, y)


def test_evaluate_examples():
    assert evaluate(WeakClassifier((0,), (0.0,), 0.0), [3.0]) == 0.0
    assert evaluate(WeakClassifier((0,), (1.0,), 0.0), [math.log(3)]) == pytest.approx(0.5, abs=1e-15)
    assert evaluate(WeakClassifier((0,), (1.0,), 0.0), [1e6]) == 1.0
    assert evaluate(WeakClassifier((0,), (1.0,), 0.0), [-1e6]) == -1.0


def test_fit_separable_sign():
    x = np.array([[1.0], [1.0], [-1.0], [-1.0]])
    wc = fit_logistic(Dataset(x, np.array([1, 1, -1, -1])), [0])
    assert wc.coefficients[0] > 0
    assert wc.train_auc == 1.0


def test_fit_uninformative_auc_near_half():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2000, 1))
    y = np.where(np.arange(2000) % 2, 1, -1)
    rng.shuffle(y)
    assert abs(fit_logistic(Dataset(x, y), [0]).train_auc - 0.5) <= 0.05


def test_fit_gradient_below_tolerance():
    ds = _random_ds()
    for idx in ([0], [1, 2], [0, 3]):
        wc = fit_logistic(ds, idx, tolerance=1e-8)
        theta = np.array([wc.intercept, *wc.coefficients])
        _, grad = logistic_loss(theta, ds.features[:, idx], ds.labels.astype(float))
        assert np.max(np.abs(grad)) < 1e-8


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), d=st.integers(1, 2))
def test_logistic_gradient_finite_differences(seed, d):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(50, d))
    y = np.where(rng.random(50) < 0.4, 1.0, -1.0)
    theta = rng.normal(size=d + 1)
    _, grad = logistic_loss(theta, x, y)
    eps = 1e-6
    fd = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = eps
        fd[i] = (logistic_loss(theta + e, x, y)[0] - logistic_loss(theta - e, x, y)[0]) / (2 * eps)
    np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-8)


def test_ridge_is_not_applied_to_intercept():
    x = np.zeros((4, 1))
    y = np.array([1.0, 1.0, 1.0, -1.0])
    _, grad = logistic_loss(np.array([0.0, 2.0]), x, y)
    assert grad[1] == pytest.approx(RIDGE * 2.0)


def test_fit_flags_non_convergence():
    ds = _random_ds(seed=2)
    with pytest.warns(ConvergenceWarning):
        wc = fit_logistic(ds, [0, 1], max_iters=1, tolerance=1e-14)
    assert not wc.converged


def test_fit_single_class_rejected():
    with pytest.raises(DataError):
        fit_logistic(Dataset(np.zeros((3, 1)), np.array([1, 1, 1])), [0])


def test_pool_sizes():
    assert len(candidate_subsets(38, True)) == 741
    ds = _random_ds(f=5)
    pool = build_pool(ds, PoolConfig(include_pairs=False))
    assert [wc.feature_indices for wc in pool] == [(i,) for i in range(5)]


def test_pool_truncation_keeps_best():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(300, 12))
    z = x[:, :6] @ rng.normal(size=6) + rng.normal(size=300)
    ds = Dataset(x, np.where(z > 0, 1, -1))
    full = build_pool(ds, PoolConfig(max_classifiers=78))
    assert len(full) == 78
    kept = build_pool(ds, PoolConfig(max_classifiers=20))
    assert len(kept) == 20
    kept_keys = {wc.feature_indices for wc in kept}
    dropped = [wc for wc in full if wc.feature_indices not in kept_keys]
    assert min(wc.train_auc for wc in kept) >= max(wc.train_auc for wc in dropped)
    order = [wc.feature_indices for wc in full if wc.feature_indices in kept_keys]
    assert [wc.feature_indices for wc in kept] == order


def test_pool_deterministic_across_threads(monkeypatch):
    ds = _random_ds(f=6, seed=4)
    monkeypatch.setenv("CVQBOOST_THREADS", "1")
    a = build_pool(ds, PoolConfig())
    monkeypatch.setenv("CVQBOOST_THREADS", "3")
    b = build_pool(ds, PoolConfig())
    assert a == b


def test_predict_matrix_matches_evaluate():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(10, 3))
    pool = [
        WeakClassifier((0,), (0.7,), -0.2),
        WeakClassifier((1, 2), (1.5, -0.3), 0.1),
        WeakClassifier((2,), (-2.0,), 0.0),
    ]
    h = predict_matrix(pool, x)
    for s in range(10):
        for i, wc in enumerate(pool):
            assert h[s, i] == evaluate(wc, x[s])
    assert np.all(np.abs(h) <= 1)


def test_predict_matrix_trivial_cases():
    wc = WeakClassifier((0,), (0.0,), 0.0)
    np.testing.assert_array_equal(predict_matrix([wc, wc], np.ones((4, 2))), np.zeros((4, 2)))
    one = WeakClassifier((1,), (0.4,), 0.3)
    assert predict_matrix([one], np.array([[0.0, 2.0]]))[0, 0] == evaluate(one, [0.0, 2.0])


def test_predict_matrix_dimension_mismatch():
    with pytest.raises(DataError):
        predict_matrix([WeakClassifier((3,), (1.0,), 0.0)], np.zeros((2, 2)))
    with pytest.raises(DataError):
        predict_matrix([], np.zeros((2, 2)))


def test_weak_classifier_validation():
    with pytest.raises(DataError):
        WeakClassifier((1, 1), (1.0, 1.0), 0.0)
    with pytest.raises(DataError):
        WeakClassifier((0,), (float("nan"),), 0.0)
