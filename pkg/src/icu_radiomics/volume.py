"""CT volumes and label masks with physical spacing.

Arrays are indexed ``[x, y, z]``; flat storage (NIfTI and the raw ``.bin``
format) is x-fastest, i.e. Fortran order.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nifti
from .errors import (
    CorruptHeader,
    DimsMismatch,
    EmptyMask,
    FrameMismatch,
    LabelOutOfRange,
    NonFiniteData,
    NonIntegralData,
    SpacingMismatch,
    UnsupportedFormat,
)

SPACING_RTOL = 1e-6

RAW_DTYPES = ("uint8", "int16", "int32", "float32", "float64")


class MaskSemantics(enum.Enum):
    LOBE_MAP = "lobe_map"
    BINARY_OPACITY = "binary_opacity"

    @property
    def max_label(self) -> int:
        return 5 if self is MaskSemantics.LOBE_MAP else 1


def _check_spacing(spacing: Sequence[float]) -> tuple[float, float, float]:
    sp = tuple(float(s) for s in spacing)
    if len(sp) != 3 or not all(math.isfinite(s) and s > 0 for s in sp):
        raise CorruptHeader(f"spacing must be three finite positive values, got {spacing!r}")
    return sp  # type: ignore[return-value]


def _frozen(values: np.ndarray) -> np.ndarray:
    values.flags.writeable = False
    return values


def default_frame_id(dims: Sequence[int], origin: Sequence[float] = (0.0, 0.0, 0.0)) -> str:
    """Identity token for a voxel grid; spacing is checked separately with a tolerance."""
    key = "dims=%s;origin=%s" % (
        ",".join(str(int(d)) for d in dims),
        ",".join("%.3f" % float(o) for o in origin),
    )
    return hashlib.sha1(key.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class VoxelVolume:
    """A 3D scalar grid in HU (or filtered intensity) with spacing in mm."""

    values: np.ndarray
    spacing: tuple[float, float, float]
    frame_id: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3 or min(values.shape) < 1:
            raise CorruptHeader(f"volume must be 3D with non-empty axes, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteData("volume contains NaN or Inf")
        object.__setattr__(self, "values", _frozen(np.array(values, copy=True)))
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))
        if not self.frame_id:
            object.__setattr__(self, "frame_id", default_frame_id(values.shape))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape  # type: ignore[return-value]

    @property
    def voxel_volume(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def with_values(self, values: np.ndarray) -> "VoxelVolume":
        """Same grid, new intensities."""
        return VoxelVolume(values, self.spacing, self.frame_id)


@dataclass(frozen=True, eq=False)
class LabelMask:
    """Integer labels aligned to a :class:`VoxelVolume`."""

    labels: np.ndarray
    spacing: tuple[float, float, float]
    frame_id: str = ""
    semantics: MaskSemantics = MaskSemantics.BINARY_OPACITY

    def __post_init__(self):
        raw = np.asarray(self.labels)
        if raw.ndim != 3 or min(raw.shape) < 1:
            raise CorruptHeader(f"mask must be 3D with non-empty axes, got shape {raw.shape}")
        if raw.dtype.kind == "b":
            raw = raw.astype(np.uint8)
        if raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)):
                raise NonFiniteData("mask contains NaN or Inf")
            if not np.all(raw == np.round(raw)):
                raise NonIntegralData("mask values must be integral")
        labels = raw.astype(np.int64)
        lo, hi = int(labels.min()), int(labels.max())
        if lo < 0 or hi > self.semantics.max_label:
            raise LabelOutOfRange(
                f"{self.semantics.value} labels must lie in 0..{self.semantics.max_label}, found {lo}..{hi}"
            )
        object.__setattr__(self, "labels", _frozen(labels.astype(np.uint8)))
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))
        if not self.frame_id:
            object.__setattr__(self, "frame_id", default_frame_id(labels.shape))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.labels.shape  # type: ignore[return-value]

    @property
    def voxel_volume(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def binary(self) -> np.ndarray:
        return self.labels > 0

    def is_empty(self) -> bool:
        return not bool(self.labels.any())


@dataclass(frozen=True)
class AlignmentToken:
    """Proof that a volume and its masks share one voxel grid."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    frame_id: str
    n_masks: int = field(default=0, compare=False)


def validate_alignment(volume: VoxelVolume, masks: Sequence[LabelMask]) -> AlignmentToken:
    for i, m in enumerate(masks):
        if tuple(m.dims) != tuple(volume.dims):
            raise DimsMismatch(f"mask {i} dims {m.dims} != volume dims {volume.dims}")
        for a, b in zip(m.spacing, volume.spacing):
            if abs(a - b) > SPACING_RTOL * max(abs(a), abs(b)):
                raise SpacingMismatch(f"mask {i} spacing {m.spacing} != volume spacing {volume.spacing}")
        if m.frame_id != volume.frame_id:
            raise FrameMismatch(f"mask {i} frame {m.frame_id!r} != volume frame {volume.frame_id!r}")
    return AlignmentToken(tuple(volume.dims), volume.spacing, volume.frame_id, len(masks))


def mask_bbox(mask: np.ndarray, margin: int = 0) -> tuple[slice, slice, slice]:
    """Tight bounding box of nonzero voxels dilated by ``margin``, clamped to the grid."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    nz = np.nonzero(mask)
    if nz[0].size == 0:
        raise EmptyMask("mask has no nonzero voxels")
    return tuple(
        slice(max(int(idx.min()) - margin, 0), min(int(idx.max()) + margin + 1, n))
        for idx, n in zip(nz, mask.shape)
    )  # type: ignore[return-value]


def crop_to_mask_bbox(
    volume: VoxelVolume, mask: LabelMask, margin_voxels: int = 0
) -> tuple[VoxelVolume, LabelMask]:
    validate_alignment(volume, [mask])
    box = mask_bbox(mask.labels, margin_voxels)
    tag = "[%s]" % ",".join(f"{s.start}:{s.stop}" for s in box)
    frame = volume.frame_id + tag
    return (
        VoxelVolume(volume.values[box], volume.spacing, frame),
        LabelMask(mask.labels[box], mask.spacing, frame, mask.semantics),
    )


# --------------------------------------------------------------------------- IO


def _raw_paths(path: Path) -> tuple[Path, Path]:
    if path.suffix == ".json":
        return path.with_suffix(".bin"), path
    return path.with_suffix(".bin"), path.with_suffix(".json")


def _read_raw(path: Path) -> tuple[np.ndarray, tuple[float, float, float], str]:
    bin_path, json_path = _raw_paths(path)
    try:
        header = json.loads(json_path.read_text())
        dims = [int(d) for d in header["dims"]]
        spacing = header["spacing"]
        dtype = header.get("dtype", "float64")
        order = header.get("byte_order", "little")
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CorruptHeader(f"unreadable raw header {json_path}: {exc}") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise CorruptHeader(f"dims must be three positive integers, got {dims}")
    spacing = _check_spacing(spacing)
    if dtype not in RAW_DTYPES:
        raise UnsupportedFormat(f"raw dtype {dtype!r} not in {RAW_DTYPES}")
    if order not in ("little", "big"):
        raise CorruptHeader(f"byte_order must be 'little' or 'big', got {order!r}")
    dt = np.dtype(dtype).newbyteorder("<" if order == "little" else ">")
    data = np.fromfile(bin_path, dtype=dt)
    if data.size != int(np.prod(dims)):
        raise CorruptHeader(f"{bin_path} holds {data.size} values, header expects {int(np.prod(dims))}")
    frame = header.get("frame_id") or default_frame_id(dims, header.get("origin", (0.0, 0.0, 0.0)))
    return data.reshape(dims, order="F"), spacing, str(frame)


def write_raw(
    path: str | Path,
    values: np.ndarray,
    spacing: Sequence[float],
    dtype: str = "float64",
    frame_id: str | None = None,
    byte_order: str = "little",
) -> Path:
    """Write ``<name>.bin`` + ``<name>.json``; returns the ``.json`` path."""
    bin_path, json_path = _raw_paths(Path(path))
    dt = np.dtype(dtype).newbyteorder("<" if byte_order == "little" else ">")
    arr = np.asarray(values)
    bin_path.write_bytes(arr.astype(dt).ravel(order="F").tobytes())
    header = {
        "dims": [int(d) for d in arr.shape],
        "spacing": [float(s) for s in spacing],
        "dtype": dtype,
        "byte_order": byte_order,
    }
    if frame_id:
        header["frame_id"] = frame_id
    json_path.write_text(json.dumps(header, indent=2))
    return json_path


def _read_any(path: str | Path) -> tuple[np.ndarray, tuple[float, float, float], str]:
    p = Path(path)
    name = p.name.lower()
    if name.endswith(".nii") or name.endswith(".nii.gz"):
        img = nifti.read(p)
        frame = default_frame_id(img.data.shape, img.origin)
        return img.data, _check_spacing(img.spacing), frame
    if p.suffix in (".bin", ".json"):
        return _read_raw(p)
    raise UnsupportedFormat(f"unsupported volume format: {p}")


def load_volume(path: str | Path) -> VoxelVolume:
    data, spacing, frame = _read_any(path)
    data = data.astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise NonFiniteData(f"{path} contains NaN or Inf")
    return VoxelVolume(data, spacing, frame)


def load_mask(path: str | Path, semantics: MaskSemantics = MaskSemantics.BINARY_OPACITY) -> LabelMask:
    data, spacing, frame = _read_any(path)
    if data.dtype.kind == "f":
        if not np.all(np.isfinite(data)):
            raise NonFiniteData(f"{path} contains NaN or Inf")
        if not np.all(data == np.round(data)):
            raise NonIntegralData(f"{path} holds non-integral mask values")
    return LabelMask(data, spacing, frame, semantics)


def save_volume(path: str | Path, volume: VoxelVolume | LabelMask, dtype: str | None = None) -> Path:
    """Write a volume or mask as NIfTI-1 (``.nii``/``.nii.gz``) or raw (``.bin``/``.json``)."""
    p = Path(path)
    arr = volume.values if isinstance(volume, VoxelVolume) else volume.labels
    if dtype is None:
        dtype = "float64" if isinstance(volume, VoxelVolume) else "uint8"
    name = p.name.lower()
    if name.endswith(".nii") or name.endswith(".nii.gz"):
        nifti.write(p, arr.astype(dtype), volume.spacing)
        return p
    if p.suffix in (".bin", ".json"):
        return write_raw(p, arr, volume.spacing, dtype=dtype, frame_id=volume.frame_id)
    raise UnsupportedFormat(f"unsupported volume format: {p}")
