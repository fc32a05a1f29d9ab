"""Package-vs-oracle comparison shared by the unit and acceptance suites."""

from __future__ import annotations

import numpy as np

import oracles
from icu_radiomics.texture import glcm, gldm, glrlm, glszm, ngtdm
from icu_radiomics.texture.discretize import from_levels

RTOL = 1e-10
ATOL = 1e-12  # for features whose exact value is zero


def random_levels(rng: np.random.Generator, max_side: int = 8, max_ng: int = 5) -> tuple[np.ndarray, int]:
    shape = tuple(int(s) for s in rng.integers(1, max_side + 1, 3))
    ng = int(rng.integers(1, max_ng + 1))
    levels = rng.integers(1, ng + 1, shape)
    levels[rng.random(shape) < rng.uniform(0.0, 0.5)] = 0
    if not levels.any():
        levels.flat[0] = 1
    return levels.astype(np.int32), max(ng, int(levels.max()))


def _close(got, want) -> bool:
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    return bool(np.all(np.abs(got - want) <= RTOL * np.abs(want) + ATOL))


def compare(levels: np.ndarray, ng: int, alpha: int = 0) -> list[str]:
    """Names of every matrix or feature that disagrees with the oracle."""
    gray = from_levels(levels, ng)
    bad: list[str] = []

    mats = glcm.glcm_matrices(gray)
    if not np.array_equal(mats, oracles.brute_glcm(levels, ng)):
        bad.append("GLCM matrix")
    for k, m in enumerate(mats):
        if m.any():
            want = oracles.glcm_feature_dict(m)
            got = glcm.features_from_matrix(m, ng)
            bad += [f"GLCM[{k}].{n}" for n, g in zip(glcm.NAMES, got) if not _close(g, want[n])]

    n_vox = int(np.count_nonzero(levels))
    runs = glrlm.glrlm_matrices(gray)
    if not np.array_equal(runs, oracles.brute_glrlm(levels, ng)):
        bad.append("GLRLM matrix")
    for k, m in enumerate(runs):
        want = oracles.size_feature_dict(m, n_vox)
        got = glrlm.features_from_matrix(m, n_vox)
        bad += [f"GLRLM[{k}].{key}" for key, g in zip(glrlm._KEYS, got) if not _close(g, want[key])]

    zones = glszm.glszm_matrix(gray)
    if zones.shape != oracles.brute_glszm(levels, ng).shape or not np.array_equal(zones, oracles.brute_glszm(levels, ng)):
        bad.append("GLSZM matrix")
    want = oracles.size_feature_dict(zones, n_vox)
    got = glszm.features_from_matrix(zones, n_vox)
    bad += [f"GLSZM.{key}" for key, g in zip(glszm._KEYS, got) if not _close(g, want[key])]

    n, s = ngtdm.ngtdm_matrix(gray)
    bn, bs = oracles.brute_ngtdm(levels, ng)
    if not np.array_equal(n, bn) or not _close(s, bs):
        bad.append("NGTDM matrix")
    want = oracles.ngtdm_feature_dict(bn, bs)
    got = ngtdm.features_from_matrix(n, s)
    bad += [f"NGTDM.{k}" for k, g in zip(ngtdm.NAMES, got) if not _close(g, want[k])]

    dep = gldm.gldm_matrix(gray, alpha)
    if not np.array_equal(dep, oracles.brute_gldm(levels, ng, alpha)):
        bad.append("GLDM matrix")
    want = oracles.size_feature_dict(dep, int(dep.sum()))
    got = gldm.features_from_matrix(dep)
    bad += [f"GLDM.{key}" for key, g in zip(gldm._KEYS, got) if not _close(g, want[key])]
    return bad
