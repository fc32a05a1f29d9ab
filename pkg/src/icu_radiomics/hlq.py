"""Hierarchical lobe-wise quantification (HLQ).

Eight lung ROIs (whole, left, right, lobes 1-5) are each split into four HU
bands; for each of the 32 components we report the opacity volume (VPO, mm^3)
and the opacity fraction (RPO). Bands are half-open: a voxel at exactly -750
HU belongs to HU2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask
from .texture.vector import FeatureVector
from .volume import LabelMask, MaskSemantics, VoxelVolume, validate_alignment

HU_BOUNDARIES = (-750.0, -300.0, 50.0)
HU_RANGES = (
    (-math.inf, -750.0),
    (-750.0, -300.0),
    (-300.0, 50.0),
    (50.0, math.inf),
)
HU_MEANING = ("normal lung", "ground glass opacity", "consolidation", "calcification")

ROI_NAMES = ("Whole Lung", "Left Lung", "Right Lung", "Lobe#1", "Lobe#2", "Lobe#3", "Lobe#4", "Lobe#5")
ROI_LABELS = {
    "Whole Lung": (1, 2, 3, 4, 5),
    "Left Lung": (4, 5),
    "Right Lung": (1, 2, 3),
    "Lobe#1": (1,),
    "Lobe#2": (2,),
    "Lobe#3": (3,),
    "Lobe#4": (4,),
    "Lobe#5": (5,),
}


def hlq_feature_names() -> tuple[str, ...]:
    return tuple(
        f"{roi} {kind} HU{k}" for roi in ROI_NAMES for k in range(1, 5) for kind in ("VPO", "RPO")
    )


@dataclass(frozen=True, eq=False)
class RoiSet:
    rois: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.rois[name]

    def __iter__(self):
        return iter(self.rois.items())


def build_rois(lobe_mask: LabelMask) -> RoiSet:
    if lobe_mask.semantics is not MaskSemantics.LOBE_MAP:
        raise ValueError("build_rois needs a LOBE_MAP mask")
    lab = lobe_mask.labels
    if not lab.any():
        raise EmptyMask("lobe mask has no lobe voxels")
    return RoiSet({name: np.isin(lab, ROI_LABELS[name]) for name in ROI_NAMES})


def hu_band(values: np.ndarray, hu_index: int) -> np.ndarray:
    if hu_index not in (1, 2, 3, 4):
        raise ValueError(f"hu_index must be 1..4, got {hu_index}")
    lo, hi = HU_RANGES[hu_index - 1]
    return (values >= lo) & (values < hi)


def component_mask(volume: VoxelVolume, roi: np.ndarray, hu_index: int) -> np.ndarray:
    if roi.shape != volume.dims:
        raise ValueError(f"roi shape {roi.shape} != volume dims {volume.dims}")
    return np.asarray(roi, dtype=bool) & hu_band(volume.values, hu_index)


def _binary(mask) -> np.ndarray:
    return mask.binary() if isinstance(mask, LabelMask) else np.asarray(mask, dtype=bool)


def vpo(opacity_mask, component: np.ndarray, spacing) -> float:
    sx, sy, sz = spacing
    return float(np.count_nonzero(_binary(opacity_mask) & component)) * (sx * sy * sz)


def rpo(opacity_mask, component: np.ndarray, spacing) -> float:
    n_comp = np.count_nonzero(component)
    if n_comp == 0:
        return 0.0
    return float(np.count_nonzero(_binary(opacity_mask) & component)) / float(n_comp)


def extract_hlq(volume: VoxelVolume, lobe_mask: LabelMask, opacity_mask: LabelMask) -> FeatureVector:
    validate_alignment(volume, [lobe_mask, opacity_mask])
    rois = build_rois(lobe_mask)
    opacity = opacity_mask.binary()
    bands = [hu_band(volume.values, k) for k in range(1, 5)]
    values = []
    for name in ROI_NAMES:
        roi = rois[name]
        for band in bands:
            comp = roi & band
            values.append(vpo(opacity, comp, volume.spacing))
            values.append(rpo(opacity, comp, volume.spacing))
    return FeatureVector(hlq_feature_names(), values)
