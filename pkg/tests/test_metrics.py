import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqboost.errors import DataError
from cvqboost.metrics import accuracy, auc, balanced_accuracy, best_balanced_threshold


def pair_count_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == -1]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (pos.size * neg.size)


def test_auc_examples():
    assert auc([0.9, 0.8, 0.3, 0.1], [1, -1, 1, -1]) == 0.75
    assert auc([3, 2, 1], [1, -1, -1]) == 1.0
    assert auc([0.4, 0.4, 0.4], [1, -1, 1]) == 0.5


def test_auc_single_class():
    with pytest.raises(DataError):
        auc([0.1, 0.2], [1, 1])


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 80), levels=st.integers(1, 20))
def test_auc_matches_pair_counting(seed, n, levels):
    rng = np.random.default_rng(seed)
    scores = rng.integers(0, levels, size=n) / levels  # ties by construction
    labels = np.where(rng.random(n) < 0.5, 1, -1)
    labels[:2] = [1, -1]
    assert abs(auc(scores, labels) - pair_count_auc(scores, labels)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 60))
def test_auc_monotone_transform_invariant(seed, n):
    rng = np.random.default_rng(seed)
    scores = np.round(rng.normal(size=n), 1)
    labels = np.where(rng.random(n) < 0.5, 1, -1)
    labels[:2] = [1, -1]
    assert auc(np.exp(3 * scores) + 7, labels) == auc(scores, labels)


def test_accuracy_metrics():
    assert accuracy([1, -1, 1, 1], [1, -1, -1, 1]) == 0.75
    assert balanced_accuracy([1, -1, -1, -1], [1, 1, -1, -1]) == 0.75


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 40))
def test_threshold_matches_exhaustive_scan(seed, n):
    rng = np.random.default_rng(seed)
    scores = np.round(rng.normal(size=n), 1)
    labels = np.where(rng.random(n) < 0.4, 1, -1)
    labels[:2] = [1, -1]
    u = np.unique(scores)
    cands = [u[0] - 1.0] + list((u[:-1] + u[1:]) / 2)
    vals = [balanced_accuracy(np.where(scores > t, 1, -1), labels) for t in cands]
    t = best_balanced_threshold(scores, labels)
    assert balanced_accuracy(np.where(scores > t, 1, -1), labels) == max(vals)
    assert t == cands[int(np.argmax(vals))]
