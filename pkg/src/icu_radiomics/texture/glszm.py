"""Gray level size zone matrix (GLSZM) features.

A zone is a 26-connected component of voxels sharing one gray level.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .discretize import GrayVolume
from .neighbors import size_matrix_statistics
from .vector import FeatureVector

NAMES = (
    "SmallAreaEmphasis",
    "LargeAreaEmphasis",
    "GrayLevelNonUniformity",
    "GLNonUniformityNormalized",
    "SizeZoneNonUniformity",
    "SZNonUniformityNormalized",
    "ZonePercentage",
    "GrayLevelVariance",
    "ZoneVariance",
    "ZoneEntropy",
    "LowGrayLevelZoneEmphasis",
    "HighGrayLevelZoneEmphasis",
    "SmallAreaLowGL",
    "SmallAreaHighGL",
    "LargeAreaLowGL",
    "LargeAreaHighGL",
)

_KEYS = ("SE", "LE", "GLN", "GLNN", "SN", "SNN", "PCT", "GLV", "SV", "ENT", "LGL", "HGL", "SLGL", "SHGL", "LLGL", "LHGL")

_STRUCTURE = np.ones((3, 3, 3), dtype=bool)


def zone_sizes(gray: GrayVolume) -> list[np.ndarray]:
    """Per level (index 0 = level 1), the sizes of its zones."""
    out = []
    for g in range(1, gray.n_levels + 1):
        sel = gray.levels == g
        if not sel.any():
            out.append(np.zeros(0, dtype=np.int64))
            continue
        labels, n = ndimage.label(sel, structure=_STRUCTURE)
        out.append(np.bincount(labels.ravel(), minlength=n + 1)[1:].astype(np.int64))
    return out


def glszm_matrix(gray: GrayVolume) -> np.ndarray:
    """Zone counts, shape ``(Ng, largest zone)``; column k = zones of size k + 1."""
    sizes = zone_sizes(gray)
    width = max(int(s.max()) for s in sizes if s.size)
    out = np.zeros((gray.n_levels, width), dtype=np.int64)
    for g, s in enumerate(sizes):
        if s.size:
            out[g] = np.bincount(s - 1, minlength=width)
    return out


def features_from_matrix(counts: np.ndarray, n_voxels: int) -> np.ndarray:
    stats = size_matrix_statistics(counts, n_voxels)
    return np.array([stats[k] for k in _KEYS])


def glszm_features(gray: GrayVolume) -> FeatureVector:
    return FeatureVector(NAMES, features_from_matrix(glszm_matrix(gray), gray.n_voxels))
