"""Threshold-free and thresholded classification metrics on +/-1 labels."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import DataError


def auc(scores, labels) -> float:
    """ROC AUC via the Mann-Whitney rank statistic; ties count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DataError(f"{scores.size} scores for {labels.size} labels")
    pos = labels == 1
    n_pos = int(np.count_nonzero(pos))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy(predicted, labels) -> float:
    return float(np.mean(np.asarray(predicted) == np.asarray(labels)))


def balanced_accuracy(predicted, labels) -> float:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    pos = labels == 1
    if not pos.any() or pos.all():
        raise DataError("balanced accuracy needs both classes present")
    tpr = np.mean(predicted[pos] == 1)
    tnr = np.mean(predicted[~pos] == -1)
    return float((tpr + tnr) / 2)


def best_balanced_threshold(scores, labels) -> float:
    """Threshold t maximizing balanced accuracy of ``score > t``.

    Candidates are the midpoints between consecutive distinct scores plus
    one value below the minimum; the first best candidate (lowest t) wins.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(np.count_nonzero(pos))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("threshold selection needs both classes present")
    distinct = np.unique(scores)
    candidates = np.concatenate([[distinct[0] - 1.0], (distinct[:-1] + distinct[1:]) / 2])
    # count of positives / negatives with score <= candidate
    pos_sorted = np.sort(scores[pos])
    neg_sorted = np.sort(scores[~pos])
    pos_below = np.searchsorted(pos_sorted, candidates, side="right")
    neg_below = np.searchsorted(neg_sorted, candidates, side="right")
    bal = ((n_pos - pos_below) / n_pos + neg_below / n_neg) / 2
    return float(candidates[int(np.argmax(bal))])
