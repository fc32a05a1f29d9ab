"""Gray level co-occurrence matrix (GLCM) features.

Symmetric matrices are built for each of the 13 directions at distance 1;
features are computed per direction and averaged (``aggregate="mean"``), or
computed once on the summed matrix (``aggregate="merged"``).

Degenerate conventions: Correlation is 1 when either marginal has zero
variance; Imc1 is 0 when both marginal entropies are 0; MCC is 1 when fewer
than two gray levels occur. A mask without any neighbouring pair is treated
as a single self co-occurrence of its level.
"""

from __future__ import annotations

import math

import numpy as np

from .discretize import GrayVolume
from .neighbors import DIRECTIONS, shifted_pair
from .vector import EPS, FeatureVector

NAMES = (
    "Autocorrelation",
    "JointAverage",
    "ClusterProminence",
    "ClusterShade",
    "ClusterTendency",
    "Contrast",
    "Correlation",
    "DifferenceAverage",
    "DifferenceEntropy",
    "DifferenceVariance",
    "JointEnergy",
    "JointEntropy",
    "Imc1",
    "Imc2",
    "Idm",
    "Idmn",
    "Id",
    "Idn",
    "InverseVariance",
    "MaximumProbability",
    "SumAverage",
    "SumEntropy",
    "SumSquares",
    "MCC",
)


def glcm_matrices(gray: GrayVolume) -> np.ndarray:
    """Integer co-occurrence counts, shape ``(13, Ng, Ng)``, symmetric per direction."""
    lv = gray.levels
    ng = gray.n_levels
    out = np.zeros((len(DIRECTIONS), ng, ng), dtype=np.int64)
    for k, d in enumerate(DIRECTIONS):
        pair = shifted_pair(lv.shape, d)
        if pair is None:
            continue
        a = lv[pair[0]]
        b = lv[pair[1]]
        ok = (a > 0) & (b > 0)
        idx = (a[ok].astype(np.int64) - 1) * ng + (b[ok] - 1)
        m = np.bincount(idx, minlength=ng * ng).reshape(ng, ng)
        out[k] = m + m.T
    return out


def _mcc(p: np.ndarray, px: np.ndarray, py: np.ndarray) -> float:
    rows = px > 0
    cols = py > 0
    if rows.sum() < 2:
        return 1.0
    q = p[np.ix_(rows, cols)]
    a = q / np.sqrt(px[rows])[:, None] / np.sqrt(py[cols])[None, :]
    # a @ a.T is symmetric and similar to the MCC matrix Q
    eig = np.linalg.eigvalsh(a @ a.T)
    second = float(eig[-2])
    # the leading eigenvalue is 1; anything at rounding level means rank 1
    if second <= 16 * EPS * float(eig[-1]) * q.shape[0]:
        return 0.0
    return math.sqrt(second)


def features_from_matrix(counts: np.ndarray, ng: int) -> np.ndarray:
    """The 24 GLCM features of one (nonempty) count matrix."""
    p = counts / counts.sum()
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    j = np.arange(1, ng + 1, dtype=np.float64)[None, :]
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    ux = float(np.sum(px * i[:, 0]))
    uy = float(np.sum(py * j[0]))
    sx = math.sqrt(float(np.sum(px * (i[:, 0] - ux) ** 2)))
    sy = math.sqrt(float(np.sum(py * (j[0] - uy) ** 2)))

    kdiff = np.abs(i - j).astype(np.int64).ravel()
    ksum = (i + j).astype(np.int64).ravel()
    p_diff = np.bincount(kdiff, weights=p.ravel(), minlength=ng)  # k = 0..Ng-1
    p_sum = np.bincount(ksum, weights=p.ravel(), minlength=2 * ng + 1)[2:]  # k = 2..2Ng
    k_diff = np.arange(ng, dtype=np.float64)
    k_sum = np.arange(2, 2 * ng + 1, dtype=np.float64)

    pxpy = px[:, None] * py[None, :]
    hx = float(-np.sum(px * np.log2(px + EPS)))
    hy = float(-np.sum(py * np.log2(py + EPS)))
    hxy = float(-np.sum(p * np.log2(p + EPS)))
    hxy1 = float(-np.sum(p * np.log2(pxpy + EPS)))
    hxy2 = float(-np.sum(pxpy * np.log2(pxpy + EPS)))

    cross = i + j - ux - uy
    diff2 = (i - j) ** 2
    autocorr = float(np.sum(p * i * j))
    diff_avg = float(np.sum(k_diff * p_diff))
    corr = (autocorr - ux * uy) / (sx * sy) if sx * sy > 0 else 1.0
    hmax = max(hx, hy)
    imc1 = (hxy - hxy1) / hmax if hmax > 0 else 0.0
    imc2 = math.sqrt(1.0 - math.exp(-2.0 * (hxy2 - hxy))) if hxy2 > hxy else 0.0

    return np.array(
        [
            autocorr,
            ux,
            float(np.sum(p * cross**4)),
            float(np.sum(p * cross**3)),
            float(np.sum(p * cross**2)),
            float(np.sum(p * diff2)),
            corr,
            diff_avg,
            float(-np.sum(p_diff * np.log2(p_diff + EPS))),
            float(np.sum((k_diff - diff_avg) ** 2 * p_diff)),
            float(np.sum(p * p)),
            hxy,
            imc1,
            imc2,
            float(np.sum(p / (1.0 + diff2))),
            float(np.sum(p / (1.0 + diff2 / ng**2))),
            float(np.sum(p / (1.0 + np.abs(i - j)))),
            float(np.sum(p / (1.0 + np.abs(i - j) / ng))),
            float(np.sum(p_diff[1:] / k_diff[1:] ** 2)),
            float(p.max()),
            float(np.sum(k_sum * p_sum)),
            float(-np.sum(p_sum * np.log2(p_sum + EPS))),
            float(np.sum(p * (i - ux) ** 2)),
            _mcc(p, px, py),
        ]
    )


def glcm_features(gray: GrayVolume, aggregate: str = "mean") -> FeatureVector:
    mats = glcm_matrices(gray)
    ng = gray.n_levels
    nonempty = [m for m in mats if m.any()]
    if not nonempty:
        level = int(gray.levels.max())
        m = np.zeros((ng, ng), dtype=np.int64)
        m[level - 1, level - 1] = 1
        nonempty = [m]
    if aggregate == "merged":
        values = features_from_matrix(np.sum(nonempty, axis=0), ng)
    elif aggregate == "mean":
        values = np.mean([features_from_matrix(m, ng) for m in nonempty], axis=0)
    else:
        raise ValueError(f"aggregate must be 'mean' or 'merged', got {aggregate!r}")
    return FeatureVector(NAMES, values)
