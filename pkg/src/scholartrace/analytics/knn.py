"""k-nearest-neighbour classification, exact and deterministic.

Euclidean metric, majority vote among the k nearest points. Distance
ties at the neighbourhood boundary resolve by training index; vote ties
resolve by smaller mean distance, then by lowest label id.
"""

from __future__ import annotations

import numpy as np


class EmptyTrainingSet(ValueError):
    pass


class KTooLarge(ValueError):
    pass


def knn_classify(train_X, train_y, k: int, x):
    train_X = np.asarray(train_X, dtype=float)
    if train_X.ndim != 2 or train_X.shape[0] == 0:
        raise EmptyTrainingSet("training set must be a non-empty n x d matrix")
    train_y = list(train_y)
    n = train_X.shape[0]
    if len(train_y) != n:
        raise ValueError("labels must match training rows")
    if k < 1 or k % 2 == 0:
        raise ValueError(f"k must be odd and positive, got {k}")
    if k > n:
        raise KTooLarge(f"k={k} exceeds n={n}")
    x = np.asarray(x, dtype=float)
    d2 = ((train_X - x) ** 2).sum(axis=1)
    order = sorted(range(n), key=lambda i: (d2[i], i))[:k]
    votes: dict = {}
    dist_sums: dict = {}
    for i in order:
        votes[train_y[i]] = votes.get(train_y[i], 0) + 1
        dist_sums[train_y[i]] = dist_sums.get(train_y[i], 0.0) + float(np.sqrt(d2[i]))
    best = max(votes)
    best_key = None
    for label, count in votes.items():
        key = (-count, dist_sums[label] / count, label)
        if best_key is None or key < best_key:
            best_key = key
            best = label
    return best
