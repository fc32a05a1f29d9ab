"""3D shape descriptors of a binary mask.

The surface is a marching-cubes triangulation at iso-level 0.5 in physical
coordinates. Axis lengths come from the population covariance of voxel-centre
coordinates. Elongation/Flatness are 0 when the major-axis variance is 0
(single voxel).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist
from skimage import measure

from ..errors import EmptyMask
from .vector import FeatureVector

NAMES = (
    "MeshVolume",
    "VoxelVolume",
    "SurfaceArea",
    "SurfaceVolumeRatio",
    "Sphericity",
    "Compactness1",
    "Compactness2",
    "SphericalDisproportion",
    "Maximum3DDiameter",
    "Maximum2DDiameterSlice",
    "Maximum2DDiameterColumn",
    "Maximum2DDiameterRow",
    "MajorAxisLength",
    "MinorAxisLength",
    "LeastAxisLength",
    "Elongation",
    "Flatness",
)


def surface_mesh(mask: np.ndarray, spacing) -> tuple[np.ndarray, np.ndarray]:
    padded = np.pad(np.asarray(mask, dtype=np.float64), 1)
    verts, faces, _, _ = measure.marching_cubes(padded, level=0.5, spacing=tuple(spacing))
    return verts - np.asarray(spacing), faces


def mesh_volume(verts: np.ndarray, faces: np.ndarray) -> float:
    a, b, c = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    return abs(float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c)))) / 6.0)


def _max_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    if len(points) > 64:
        try:
            points = points[ConvexHull(points).vertices]
        except QhullError:
            pass  # degenerate (collinear/coplanar) point sets: fall back to all pairs
    return float(pdist(points).max())


def _max_planar_distance(verts: np.ndarray, axis: int, step: float) -> float:
    keys = np.round(verts[:, axis] / step * 2).astype(np.int64)
    other = [a for a in range(3) if a != axis]
    best = 0.0
    order = np.argsort(keys, kind="stable")
    bounds = np.flatnonzero(np.diff(keys[order])) + 1
    for group in np.split(order, bounds):
        best = max(best, _max_distance(verts[group][:, other]))
    return best


def shape_features(mask: np.ndarray, spacing) -> FeatureVector:
    """17 shape features of ``mask`` (array or anything with ``.binary()``)."""
    if hasattr(mask, "binary"):
        mask = mask.binary()
    m = np.asarray(mask) > 0
    n = int(m.sum())
    if n == 0:
        raise EmptyMask("shape features need a nonempty mask")
    sx, sy, sz = (float(s) for s in spacing)

    verts, faces = surface_mesh(m, (sx, sy, sz))
    volume = mesh_volume(verts, faces)
    area = float(measure.mesh_surface_area(verts, faces))
    voxel_volume = n * sx * sy * sz

    sphere = (36.0 * math.pi * volume**2) ** (1.0 / 3.0)
    coords = np.argwhere(m) * np.array([sx, sy, sz])
    cov = np.cov(coords, rowvar=False, bias=True) if n > 1 else np.zeros((3, 3))
    lam = np.clip(np.linalg.eigvalsh(cov)[::-1], 0.0, None)  # descending
    major, minor, least = (4.0 * math.sqrt(v) for v in lam)

    return FeatureVector(
        NAMES,
        [
            volume,
            voxel_volume,
            area,
            area / volume,
            sphere / area,
            volume / (math.sqrt(math.pi) * area**1.5),
            36.0 * math.pi * volume**2 / area**3,
            area / sphere,
            _max_distance(verts),
            _max_planar_distance(verts, 2, sz),
            _max_planar_distance(verts, 1, sy),
            _max_planar_distance(verts, 0, sx),
            major,
            minor,
            least,
            math.sqrt(lam[1] / lam[0]) if lam[0] > 0 else 0.0,
            math.sqrt(lam[2] / lam[0]) if lam[0] > 0 else 0.0,
        ],
    )
