"""Gray-level discretization of a masked region."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMask, NonPositiveBinWidth
from ..volume import LabelMask, VoxelVolume, validate_alignment


@dataclass(frozen=True, eq=False)
class GrayVolume:
    """Per-voxel gray levels in ``1..n_levels``; 0 marks voxels outside the mask."""

    levels: np.ndarray
    n_levels: int
    bin_width: float
    bin_origin: float
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    @property
    def mask(self) -> np.ndarray:
        return self.levels > 0

    @property
    def n_voxels(self) -> int:
        return int(np.count_nonzero(self.levels))

    def histogram(self) -> np.ndarray:
        """Voxel counts per level, index 0 = level 1."""
        return np.bincount(self.levels[self.levels > 0], minlength=self.n_levels + 1)[1:]


def from_levels(levels: np.ndarray, n_levels: int | None = None, spacing=(1.0, 1.0, 1.0)) -> GrayVolume:
    """Wrap an already-discretized integer array (0 = outside)."""
    lv = np.ascontiguousarray(levels, dtype=np.int32)
    if not lv.any():
        raise EmptyMask("no voxel has a positive level")
    if lv.min() < 0:
        raise ValueError("levels must be non-negative")
    ng = int(lv.max()) if n_levels is None else int(n_levels)
    if lv.max() > ng:
        raise ValueError(f"level {lv.max()} exceeds n_levels={ng}")
    return GrayVolume(lv, ng, 1.0, 1.0, tuple(spacing))


def _quantize(values: np.ndarray, inside: np.ndarray, spacing, width: float, n_max: int | None) -> GrayVolume:
    x = values[inside]
    lo, hi = float(x.min()), float(x.max())
    levels = np.zeros(values.shape, dtype=np.int32)
    if hi == lo:
        levels[inside] = 1
        return GrayVolume(levels, 1, width, lo, spacing)
    q = np.floor((x - lo) / width).astype(np.int64) + 1
    if n_max is not None:
        q = np.clip(q, 1, n_max)
    ng = int(q.max()) if n_max is None else n_max
    levels[inside] = q
    return GrayVolume(levels, ng, width, lo, spacing)


def discretize(
    volume: VoxelVolume,
    mask: LabelMask,
    bin_width: float | None = 25.0,
    n_bins: int | None = None,
) -> GrayVolume:
    """Min-anchored binning inside the mask.

    Fixed width (default): ``level = floor((x - min) / bin_width) + 1`` and
    ``n_levels`` is the highest level reached. Fixed count (``n_bins``):
    ``n_bins`` equal bins over ``[min, max]`` with the maximum clamped into the
    top bin.
    """
    validate_alignment(volume, [mask])
    inside = mask.binary()
    if not inside.any():
        raise EmptyMask("mask has no nonzero voxels")
    if n_bins is not None:
        if n_bins < 1:
            raise NonPositiveBinWidth(f"n_bins must be >= 1, got {n_bins}")
        x = volume.values[inside]
        width = (float(x.max()) - float(x.min())) / n_bins
        if width == 0:
            width = 1.0
        return _quantize(volume.values, inside, volume.spacing, width, n_bins)
    if bin_width is None or not (bin_width > 0) or not math.isfinite(bin_width):
        raise NonPositiveBinWidth(f"bin_width must be > 0, got {bin_width!r}")
    return _quantize(volume.values, inside, volume.spacing, float(bin_width), None)
