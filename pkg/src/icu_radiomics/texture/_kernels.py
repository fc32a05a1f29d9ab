"""Compiled inner loops for the run-length matrix."""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def run_length_counts(levels, dx, dy, dz, n_levels, max_len):
    """Counts of maximal equal-level runs along direction (dx, dy, dz).

    ``levels`` is int32 with 0 outside the mask. Returns an int64 array of shape
    ``(n_levels, max_len)`` where column ``k`` holds runs of length ``k + 1``.
    """
    nx, ny, nz = levels.shape
    out = np.zeros((n_levels, max_len), dtype=np.int64)
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                g = levels[x, y, z]
                if g == 0:
                    continue
                px, py, pz = x - dx, y - dy, z - dz
                if 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz and levels[px, py, pz] == g:
                    continue  # not the start of a run
                length = 1
                cx, cy, cz = x + dx, y + dy, z + dz
                while 0 <= cx < nx and 0 <= cy < ny and 0 <= cz < nz and levels[cx, cy, cz] == g:
                    length += 1
                    cx += dx
                    cy += dy
                    cz += dz
                out[g - 1, length - 1] += 1
    return out
