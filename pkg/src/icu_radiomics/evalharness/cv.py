"""Stratified k-fold splitting."""

from __future__ import annotations

import numpy as np

from ..errors import ClassTooSmall


def stratified_kfold(labels, k: int, seed: int) -> list[np.ndarray]:
    """Split indices into ``k`` disjoint test folds with per-class balance.

    Each class is shuffled with a seed-derived generator and dealt round-robin.
    The starting fold for each class continues where the previous class
    stopped, so total fold sizes also differ by at most one.
    """
    y = np.asarray(labels).ravel()
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    classes, counts = np.unique(y, return_counts=True)
    if np.any(counts < k):
        small = {int(c): int(n) for c, n in zip(classes, counts) if n < k}
        raise ClassTooSmall(f"classes {small} have fewer than k={k} members")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), k, y.size]))
    assign = np.empty(y.size, dtype=np.int64)
    offset = 0
    for c in classes:
        members = rng.permutation(np.flatnonzero(y == c))
        assign[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return [np.flatnonzero(assign == f) for f in range(k)]


def train_indices(n: int, test: np.ndarray) -> np.ndarray:
    keep = np.ones(n, dtype=bool)
    keep[test] = False
    return np.flatnonzero(keep)
