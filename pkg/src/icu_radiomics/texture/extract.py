"""Whole-lung radiomics (WLR): 17 shape + 18 filters x 93 texture = 1691 features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMask
from ..filterbank import FilterCache, FilterKind, enumerate_filter_bank
from ..volume import LabelMask, VoxelVolume, mask_bbox, validate_alignment
from . import firstorder, glcm, gldm, glrlm, glszm, ngtdm, shape
from .discretize import GrayVolume, discretize
from .vector import FeatureVector

FAMILIES = (
    ("FirstOrder", firstorder.NAMES),
    ("GLCM", glcm.NAMES),
    ("GLRLM", glrlm.NAMES),
    ("GLSZM", glszm.NAMES),
    ("NGTDM", ngtdm.NAMES),
    ("GLDM", gldm.NAMES),
)
TEXTURE_COUNT = sum(len(n) for _, n in FAMILIES)  # 93
WLR_COUNT = len(shape.NAMES) + len(enumerate_filter_bank()) * TEXTURE_COUNT  # 1691


@dataclass(frozen=True)
class ExtractionConfig:
    bin_width: float = 25.0  # HU, original image
    n_bins: int = 32  # filtered images
    gldm_alpha: int = 0
    aggregate: str = "mean"  # GLCM/GLRLM direction aggregation

    def as_dict(self) -> dict:
        return {
            "bin_width": self.bin_width,
            "n_bins": self.n_bins,
            "gldm_alpha": self.gldm_alpha,
            "aggregate": self.aggregate,
        }


def wlr_feature_names() -> tuple[str, ...]:
    names = [f"Original-Shape-{n}" for n in shape.NAMES]
    for spec in enumerate_filter_bank():
        for family, fnames in FAMILIES:
            names += [f"{spec.canonical_name}-{family}-{n}" for n in fnames]
    return tuple(names)


def texture_features(
    values: np.ndarray,
    inside: np.ndarray,
    spacing,
    gray: GrayVolume,
    config: ExtractionConfig = ExtractionConfig(),
) -> np.ndarray:
    """The 93 texture features, in family order, for one (filtered) image."""
    voxel_volume = float(np.prod(spacing))
    parts = [
        firstorder.first_order_from_values(values[inside], voxel_volume, gray.histogram()),
        glcm.glcm_features(gray, config.aggregate).values,
        glrlm.glrlm_features(gray, config.aggregate).values,
        glszm.glszm_features(gray).values,
        ngtdm.ngtdm_features(gray).values,
        gldm.gldm_features(gray, config.gldm_alpha).values,
    ]
    return np.concatenate(parts)


def extract_wlr(
    volume: VoxelVolume,
    opacity_mask: LabelMask,
    config: ExtractionConfig | None = None,
) -> FeatureVector:
    """Filter the full volume, then compute features on the mask's bounding box.

    Filtering happens before cropping so that boundary handling sees the whole
    scan; results therefore do not depend on how far the mask sits from the
    volume edge beyond the filter support.
    """
    config = config or ExtractionConfig()
    validate_alignment(volume, [opacity_mask])
    if opacity_mask.is_empty():
        raise EmptyMask("opacity mask has no nonzero voxels")
    box = mask_bbox(opacity_mask.labels)
    inside_full = opacity_mask.binary()
    inside = inside_full[box]

    values = [shape.shape_features(inside, volume.spacing).values]
    cache = FilterCache(volume)
    for spec in enumerate_filter_bank():
        filtered = cache.get(spec)
        crop = filtered.values[box]
        crop_vol = VoxelVolume(crop, volume.spacing, "crop")
        crop_mask = LabelMask(inside, volume.spacing, "crop")
        if spec.kind is FilterKind.ORIGINAL:
            gray = discretize(crop_vol, crop_mask, bin_width=config.bin_width)
        else:
            gray = discretize(crop_vol, crop_mask, bin_width=None, n_bins=config.n_bins)
        values.append(texture_features(crop, inside, volume.spacing, gray, config))
        cache.drop(spec)
    return FeatureVector(wlr_feature_names(), np.concatenate(values))
