"""Neighbouring gray tone difference matrix (NGTDM) features.

For a voxel of level ``i`` with at least one in-mask 26-neighbour, its
contribution to ``s(i)`` is ``|i - mean neighbour level|``. Voxels with no
in-mask neighbour are left out entirely.

Degenerate conventions: Coarseness is capped at 1e6 when ``sum p_i s_i`` is
0; every other zero denominator yields 0.
"""

from __future__ import annotations

import numpy as np

from .discretize import GrayVolume
from .neighbors import OFFSETS_26, shifted_pair
from .vector import FeatureVector

NAMES = ("Coarseness", "Contrast", "Busyness", "Complexity", "Strength")

COARSENESS_CAP = 1e6


def neighbour_sums(levels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum of in-mask neighbour levels and number of in-mask neighbours per voxel."""
    lv = levels.astype(np.int64)
    inside = lv > 0
    total = np.zeros(lv.shape, dtype=np.int64)
    count = np.zeros(lv.shape, dtype=np.int64)
    for off in OFFSETS_26:
        pair = shifted_pair(lv.shape, off)
        if pair is None:
            continue
        src, dst = pair
        total[src] += lv[dst]
        count[src] += inside[dst]
    return total, count


def ngtdm_matrix(gray: GrayVolume) -> tuple[np.ndarray, np.ndarray]:
    """``(n_i, s_i)`` for levels ``1..Ng``: valid-voxel counts and summed differences."""
    lv = gray.levels
    total, count = neighbour_sums(lv)
    valid = (lv > 0) & (count > 0)
    g = lv[valid].astype(np.int64)
    diff = np.abs(g - total[valid] / count[valid])
    n = np.bincount(g - 1, minlength=gray.n_levels)
    s = np.bincount(g - 1, weights=diff, minlength=gray.n_levels)
    return n, s


def features_from_matrix(n: np.ndarray, s: np.ndarray) -> np.ndarray:
    nvp = n.sum()
    if nvp == 0:
        return np.array([COARSENESS_CAP, 0.0, 0.0, 0.0, 0.0])
    p = n / nvp
    occ = p > 0
    lv = np.arange(1, n.size + 1, dtype=np.float64)[occ]
    p = p[occ]
    s = s[occ]
    ngp = p.size

    ps = float(np.sum(p * s))
    s_total = float(np.sum(s))
    coarseness = 1.0 / ps if ps != 0 else COARSENESS_CAP

    d = lv[:, None] - lv[None, :]
    pipj = p[:, None] * p[None, :]
    if ngp > 1:
        contrast = float(np.sum(pipj * d**2)) / (ngp * (ngp - 1)) * s_total / nvp
    else:
        contrast = 0.0
    busy_den = float(np.sum(np.abs((p * lv)[:, None] - (p * lv)[None, :])))
    busyness = ps / busy_den if busy_den != 0 else 0.0
    psum = p[:, None] + p[None, :]
    complexity = float(np.sum(np.abs(d) * ((p * s)[:, None] + (p * s)[None, :]) / psum)) / nvp
    strength = float(np.sum(psum * d**2)) / s_total if s_total != 0 else 0.0
    return np.array([coarseness, contrast, busyness, complexity, strength])


def ngtdm_features(gray: GrayVolume) -> FeatureVector:
    n, s = ngtdm_matrix(gray)
    return FeatureVector(NAMES, features_from_matrix(n, s))
