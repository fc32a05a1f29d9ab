"""The 18 image filters applied before texture extraction.

Conventions (frozen; see docs/feature_dictionary.md):

* intensity transforms use ``m = max|x|`` over the whole volume and are the
  identity when ``m == 0``;
* LoG sigma is physical (mm); the Gaussian is sampled per axis at
  ``sigma/spacing`` voxels, truncated at ``ceil(4*sigma/spacing)`` and
  renormalised, then the 6-neighbour Laplacian scaled by ``1/spacing**2`` is
  applied. Boundaries are half-sample symmetric (``d c b a | a b c d``);
* wavelets are single-level undecimated Coiflet-1, same boundary mode.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import ndimage

from .errors import InvalidSigma
from .volume import VoxelVolume

BOUNDARY = "reflect"  # scipy name for half-sample symmetric extension

WAVELET_SUBBANDS = ("HHH", "HHL", "HLH", "LHH", "HLL", "LHL", "LLH", "LLL")
LOG_SIGMAS = (0.5, 1.5, 2.5, 3.5, 4.5)

# Coiflet-1 analysis filters (decomposition low/high pass), closed form in sqrt(7)
_R7 = math.sqrt(7.0)
COIF1_LO = (math.sqrt(2.0) / 32.0) * np.array(
    [-3.0 + _R7, 1.0 - _R7, 14.0 - 2.0 * _R7, 14.0 + 2.0 * _R7, 5.0 + _R7, 1.0 - _R7]
)
COIF1_HI = np.array([(-1) ** (k + 1) * COIF1_LO[len(COIF1_LO) - 1 - k] for k in range(len(COIF1_LO))])


class FilterKind(enum.Enum):
    ORIGINAL = "Original"
    SQUARE = "Square"
    SQRT = "Sqrt"
    LOGARITHM = "Logarithm"
    EXPONENTIAL = "Exponential"
    WAVELET = "Wavelet"
    LOG = "LoG"


@dataclass(frozen=True)
class FilterSpec:
    kind: FilterKind
    subband: str | None = None
    sigma_mm: float | None = None

    def __post_init__(self):
        if self.kind is FilterKind.WAVELET and self.subband not in WAVELET_SUBBANDS:
            raise ValueError(f"wavelet subband must be one of {WAVELET_SUBBANDS}, got {self.subband!r}")
        if self.kind is FilterKind.LOG:
            if self.sigma_mm is None or not (self.sigma_mm > 0) or not math.isfinite(self.sigma_mm):
                raise InvalidSigma(f"LoG sigma must be > 0, got {self.sigma_mm!r}")

    @property
    def canonical_name(self) -> str:
        if self.kind is FilterKind.WAVELET:
            return self.subband  # type: ignore[return-value]
        if self.kind is FilterKind.LOG:
            return f"LoG(σ={self.sigma_mm:g})"
        return self.kind.value

    def __str__(self) -> str:
        return self.canonical_name


def enumerate_filter_bank() -> list[FilterSpec]:
    bank = [FilterSpec(k) for k in (
        FilterKind.ORIGINAL, FilterKind.SQUARE, FilterKind.SQRT, FilterKind.LOGARITHM, FilterKind.EXPONENTIAL
    )]
    bank += [FilterSpec(FilterKind.WAVELET, subband=b) for b in WAVELET_SUBBANDS]
    bank += [FilterSpec(FilterKind.LOG, sigma_mm=s) for s in LOG_SIGMAS]
    return bank


# ------------------------------------------------------------ intensity filters


def square(x: np.ndarray) -> np.ndarray:
    m = np.max(np.abs(x))
    if m == 0:
        return x.copy()
    c = 1.0 / math.sqrt(m)
    return (c * x) ** 2


def sqrt(x: np.ndarray) -> np.ndarray:
    m = np.max(np.abs(x))
    if m == 0:
        return x.copy()
    return np.sign(x) * np.sqrt(m * np.abs(x))


def logarithm(x: np.ndarray) -> np.ndarray:
    m = np.max(np.abs(x))
    if m == 0:
        return x.copy()
    s = np.sign(x) * np.log1p(np.abs(x))
    return s * (m / math.log1p(m))


def exponential(x: np.ndarray) -> np.ndarray:
    m = np.max(np.abs(x))
    if m == 0:
        return x.copy()
    c = math.log(m) / m
    return np.exp(c * x)


# ------------------------------------------------------------------------- LoG


def gaussian_taps(sigma_vox: float) -> np.ndarray:
    radius = int(math.ceil(4.0 * sigma_vox))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (t / sigma_vox) ** 2)
    return g / g.sum()


def laplacian_of_gaussian(x: np.ndarray, spacing, sigma_mm: float) -> np.ndarray:
    if not (sigma_mm > 0) or not math.isfinite(sigma_mm):
        raise InvalidSigma(f"LoG sigma must be > 0, got {sigma_mm!r}")
    x = np.asarray(x, dtype=np.float64)
    # the kernel annihilates constants, so shifting by one voxel is free and
    # makes a constant input yield exact zeros
    smooth = x - x.flat[0] if x.size else x
    for axis, sp in enumerate(spacing):
        smooth = ndimage.correlate1d(smooth, gaussian_taps(sigma_mm / sp), axis=axis, mode=BOUNDARY)
    out = np.zeros_like(smooth)
    for axis, sp in enumerate(spacing):
        out += ndimage.correlate1d(smooth, np.array([1.0, -2.0, 1.0]) / (sp * sp), axis=axis, mode=BOUNDARY)
    return out


# --------------------------------------------------------------------- wavelet


def wavelet_subband(x: np.ndarray, subband: str, mode: str = BOUNDARY) -> np.ndarray:
    """Undecimated single-level Coiflet-1 sub-band; letter i filters axis i."""
    if subband not in WAVELET_SUBBANDS:
        raise ValueError(f"unknown subband {subband!r}")
    out = np.asarray(x, dtype=np.float64)
    for axis, letter in enumerate(subband):
        out = _pass(out, letter, axis, mode)
    return out


def _pass(arr: np.ndarray, letter: str, axis: int, mode: str) -> np.ndarray:
    if letter == "L":
        return ndimage.correlate1d(arr, COIF1_LO, axis=axis, mode=mode)
    # high-pass taps sum to zero; the shift makes constant input give exact zeros
    shifted = arr - arr.flat[0] if arr.size else arr
    return ndimage.correlate1d(shifted, COIF1_HI, axis=axis, mode=mode)


def wavelet_decompose(x: np.ndarray, mode: str = BOUNDARY) -> dict[str, np.ndarray]:
    """All eight sub-bands, sharing the per-axis intermediate results."""
    x = np.asarray(x, dtype=np.float64)
    partial: dict[str, np.ndarray] = {"": x}
    for axis in range(3):
        nxt = {}
        for prefix, arr in partial.items():
            nxt[prefix + "L"] = _pass(arr, "L", axis, mode)
            nxt[prefix + "H"] = _pass(arr, "H", axis, mode)
        partial = nxt
    return {b: partial[b] for b in WAVELET_SUBBANDS}


# --------------------------------------------------------------------- dispatch


def apply_filter(volume: VoxelVolume, spec: FilterSpec) -> VoxelVolume:
    x = volume.values
    kind = spec.kind
    if kind is FilterKind.ORIGINAL:
        return volume
    if kind is FilterKind.SQUARE:
        out = square(x)
    elif kind is FilterKind.SQRT:
        out = sqrt(x)
    elif kind is FilterKind.LOGARITHM:
        out = logarithm(x)
    elif kind is FilterKind.EXPONENTIAL:
        out = exponential(x)
    elif kind is FilterKind.WAVELET:
        out = wavelet_subband(x, spec.subband)  # type: ignore[arg-type]
    elif kind is FilterKind.LOG:
        out = laplacian_of_gaussian(x, volume.spacing, spec.sigma_mm)  # type: ignore[arg-type]
    else:  # pragma: no cover
        raise ValueError(kind)
    return volume.with_values(out)


class FilterCache:
    """Lazily computes filtered variants of one volume, one run at a time.

    The wavelet sub-bands are produced together on first request since they
    share intermediate passes.
    """

    def __init__(self, volume: VoxelVolume):
        self.volume = volume
        self._cache: dict[FilterSpec, VoxelVolume] = {}

    def get(self, spec: FilterSpec) -> VoxelVolume:
        hit = self._cache.get(spec)
        if hit is not None:
            return hit
        if spec.kind is FilterKind.WAVELET:
            for band, arr in wavelet_decompose(self.volume.values).items():
                self._cache[FilterSpec(FilterKind.WAVELET, subband=band)] = self.volume.with_values(arr)
            return self._cache[spec]
        out = apply_filter(self.volume, spec)
        self._cache[spec] = out
        return out

    def __iter__(self) -> Iterator[tuple[FilterSpec, VoxelVolume]]:
        for spec in enumerate_filter_bank():
            yield spec, self.get(spec)

    def drop(self, spec: FilterSpec) -> None:
        self._cache.pop(spec, None)
