"""Neighbourhood geometry shared by the gray-level matrix families."""

from __future__ import annotations

import itertools

import numpy as np

from .vector import EPS

# 13 unique directions at distance 1 (one of each +/- pair)
DIRECTIONS: tuple[tuple[int, int, int], ...] = tuple(
    d
    for d in itertools.product((-1, 0, 1), repeat=3)
    if d != (0, 0, 0) and next(c for c in d if c != 0) > 0
)

# all 26 neighbour offsets
OFFSETS_26: tuple[tuple[int, int, int], ...] = tuple(
    d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)
)


def shifted_pair(shape, offset):
    """Slices ``(src, dst)`` with ``a[dst]`` the neighbour at ``offset`` of ``a[src]``.

    Returns ``None`` when no voxel has an in-bounds neighbour at that offset.
    """
    src, dst = [], []
    for n, o in zip(shape, offset):
        if abs(o) >= n:
            return None
        if o > 0:
            src.append(slice(0, n - o))
            dst.append(slice(o, n))
        elif o < 0:
            src.append(slice(-o, n))
            dst.append(slice(0, n + o))
        else:
            src.append(slice(None))
            dst.append(slice(None))
    return tuple(src), tuple(dst)


def size_matrix_statistics(counts: np.ndarray, n_voxels: int) -> dict[str, float]:
    """Shared emphasis/non-uniformity statistics of a (level x size) count matrix.

    Rows are gray levels ``1..Ng``, columns sizes ``1..W`` (run length, zone
    size, or dependence + 1). Used by GLRLM, GLSZM and GLDM.
    """
    m = counts.astype(np.float64)
    total = m.sum()
    p = m / total
    ng, w = m.shape
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    j = np.arange(1, w + 1, dtype=np.float64)[None, :]
    pg = p.sum(axis=1)
    ps = p.sum(axis=0)
    mu_i = float(np.sum(pg * i[:, 0]))
    mu_j = float(np.sum(ps * j[0]))
    i2 = i * i
    j2 = j * j
    return {
        "SE": float(np.sum(ps / j2[0])),
        "LE": float(np.sum(ps * j2[0])),
        "GLN": float(np.sum(m.sum(axis=1) ** 2) / total),
        "GLNN": float(np.sum(pg**2)),
        "SN": float(np.sum(m.sum(axis=0) ** 2) / total),
        "SNN": float(np.sum(ps**2)),
        "PCT": float(total / n_voxels),
        "GLV": float(np.sum(pg * (i[:, 0] - mu_i) ** 2)),
        "SV": float(np.sum(ps * (j[0] - mu_j) ** 2)),
        "ENT": float(-np.sum(p * np.log2(p + EPS))),
        "LGL": float(np.sum(pg / i2[:, 0])),
        "HGL": float(np.sum(pg * i2[:, 0])),
        "SLGL": float(np.sum(p / (i2 * j2))),
        "SHGL": float(np.sum(p * i2 / j2)),
        "LLGL": float(np.sum(p * j2 / i2)),
        "LHGL": float(np.sum(p * i2 * j2)),
    }
