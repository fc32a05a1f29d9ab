"""Gray level run length matrix (GLRLM) features, averaged over 13 directions."""

from __future__ import annotations

import numpy as np

from ._kernels import run_length_counts
from .discretize import GrayVolume
from .neighbors import DIRECTIONS, size_matrix_statistics
from .vector import FeatureVector

NAMES = (
    "ShortRunEmphasis",
    "LongRunEmphasis",
    "GrayLevelNonUniformity",
    "GLNonUniformityNormalized",
    "RunLengthNonUniformity",
    "RLNonUniformityNormalized",
    "RunPercentage",
    "GrayLevelVariance",
    "RunVariance",
    "RunEntropy",
    "LowGrayLevelRunEmphasis",
    "HighGrayLevelRunEmphasis",
    "ShortRunLowGL",
    "ShortRunHighGL",
    "LongRunLowGL",
    "LongRunHighGL",
)

_KEYS = ("SE", "LE", "GLN", "GLNN", "SN", "SNN", "PCT", "GLV", "SV", "ENT", "LGL", "HGL", "SLGL", "SHGL", "LLGL", "LHGL")


def glrlm_matrices(gray: GrayVolume) -> np.ndarray:
    """Run counts, shape ``(13, Ng, max(dims))``; column k = runs of length k + 1."""
    lv = np.ascontiguousarray(gray.levels, dtype=np.int32)
    max_len = max(lv.shape)
    return np.stack(
        [run_length_counts(lv, dx, dy, dz, gray.n_levels, max_len) for dx, dy, dz in DIRECTIONS]
    )


def features_from_matrix(counts: np.ndarray, n_voxels: int) -> np.ndarray:
    stats = size_matrix_statistics(counts, n_voxels)
    return np.array([stats[k] for k in _KEYS])


def glrlm_features(gray: GrayVolume, aggregate: str = "mean") -> FeatureVector:
    mats = glrlm_matrices(gray)
    n = gray.n_voxels
    if aggregate == "merged":
        # RunPercentage stays a per-voxel ratio: merged runs over 13x the voxels
        values = features_from_matrix(mats.sum(axis=0), n * len(mats))
    elif aggregate == "mean":
        values = np.mean([features_from_matrix(m, n) for m in mats], axis=0)
    else:
        raise ValueError(f"aggregate must be 'mean' or 'merged', got {aggregate!r}")
    return FeatureVector(NAMES, values)
