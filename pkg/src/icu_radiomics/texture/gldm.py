"""Gray level dependence matrix (GLDM) features.

The dependence of a voxel is the number of in-mask 26-neighbours whose level
differs from its own by at most ``alpha``; it indexes the matrix column as
``dependence + 1`` (so 1..27).
"""

from __future__ import annotations

import numpy as np

from .discretize import GrayVolume
from .neighbors import OFFSETS_26, shifted_pair, size_matrix_statistics
from .vector import FeatureVector

NAMES = (
    "SmallDependenceEmphasis",
    "LargeDependenceEmphasis",
    "GrayLevelNonUniformity",
    "DependenceNonUniformity",
    "DependenceNonUniformityNormalized",
    "GrayLevelVariance",
    "DependenceVariance",
    "DependenceEntropy",
    "LowGrayLevelEmphasis",
    "HighGrayLevelEmphasis",
    "SmallDependenceLowGL",
    "SmallDependenceHighGL",
    "LargeDependenceLowGL",
    "LargeDependenceHighGL",
)

_KEYS = ("SE", "LE", "GLN", "SN", "SNN", "GLV", "SV", "ENT", "LGL", "HGL", "SLGL", "SHGL", "LLGL", "LHGL")


def dependence_counts(levels: np.ndarray, alpha: int = 0) -> np.ndarray:
    lv = levels.astype(np.int64)
    dep = np.zeros(lv.shape, dtype=np.int64)
    for off in OFFSETS_26:
        pair = shifted_pair(lv.shape, off)
        if pair is None:
            continue
        src, dst = pair
        a = lv[src]
        b = lv[dst]
        dep[src] += (b > 0) & (np.abs(a - b) <= alpha)
    return dep


def gldm_matrix(gray: GrayVolume, alpha: int = 0) -> np.ndarray:
    """Counts, shape ``(Ng, 27)``; column k = voxels with dependence k."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    dep = dependence_counts(gray.levels, alpha)
    inside = gray.levels > 0
    idx = (gray.levels[inside].astype(np.int64) - 1) * 27 + dep[inside]
    return np.bincount(idx, minlength=gray.n_levels * 27).reshape(gray.n_levels, 27)


def features_from_matrix(counts: np.ndarray) -> np.ndarray:
    stats = size_matrix_statistics(counts, int(counts.sum()))
    return np.array([stats[k] for k in _KEYS])


def gldm_features(gray: GrayVolume, alpha: int = 0) -> FeatureVector:
    return FeatureVector(NAMES, features_from_matrix(gldm_matrix(gray, alpha)))
