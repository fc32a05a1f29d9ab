"""First-order intensity statistics of the masked voxels."""

from __future__ import annotations

import math

import numpy as np

from ..errors import EmptyMask
from ..volume import LabelMask, VoxelVolume, validate_alignment
from .discretize import GrayVolume, discretize
from .vector import EPS, FeatureVector

NAMES = (
    "Energy",
    "TotalEnergy",
    "Entropy",
    "Minimum",
    "10Percentile",
    "90Percentile",
    "Maximum",
    "Mean",
    "Median",
    "InterquartileRange",
    "Range",
    "MeanAbsoluteDeviation",
    "RobustMeanAbsoluteDeviation",
    "RootMeanSquared",
    "StandardDeviation",
    "Skewness",
    "Kurtosis",
    "Variance",
)


def first_order_from_values(x: np.ndarray, voxel_volume: float, histogram: np.ndarray) -> np.ndarray:
    """All 18 statistics from the masked intensities and their gray-level histogram.

    Skewness and Kurtosis are 0 for a constant region; Kurtosis is not
    excess-corrected.
    """
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = x.size
    energy = float(np.dot(x, x))
    hp = histogram[histogram > 0] / histogram.sum()
    entropy = float(-np.sum(hp * np.log2(hp + EPS)))
    p10, p25, p50, p75, p90 = np.percentile(x, [10, 25, 50, 75, 90])
    mean = float(x.mean())
    dev = x - mean
    m2 = float(np.mean(dev**2))
    m3 = float(np.mean(dev**3))
    m4 = float(np.mean(dev**4))
    robust = x[(x >= p10) & (x <= p90)]
    rmad = float(np.mean(np.abs(robust - robust.mean())))
    skew = m3 / m2**1.5 if m2 > 0 else 0.0
    kurt = m4 / m2**2 if m2 > 0 else 0.0
    return np.array(
        [
            energy,
            energy * voxel_volume,
            entropy,
            x[0],
            p10,
            p90,
            x[-1],
            mean,
            p50,
            p75 - p25,
            x[-1] - x[0],
            float(np.mean(np.abs(dev))),
            rmad,
            math.sqrt(energy / n),
            math.sqrt(m2),
            skew,
            kurt,
            m2,
        ]
    )


def first_order_features(
    volume: VoxelVolume,
    mask: LabelMask,
    gray: GrayVolume | None = None,
    bin_width: float = 25.0,
) -> FeatureVector:
    """First-order features; Entropy uses ``gray`` if given, else fixed-width bins."""
    validate_alignment(volume, [mask])
    inside = mask.binary()
    if not inside.any():
        raise EmptyMask("mask has no nonzero voxels")
    if gray is None:
        gray = discretize(volume, mask, bin_width=bin_width)
    values = first_order_from_values(volume.values[inside], volume.voxel_volume, gray.histogram())
    return FeatureVector(NAMES, values)
