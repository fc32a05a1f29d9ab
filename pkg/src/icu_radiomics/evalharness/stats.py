"""Confidence intervals and the one-tailed paired t-test."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from ..errors import LengthMismatch, TooFewValues

P_FLOOR = 1e-12


def mean_ci(values, level: float = 0.95) -> tuple[float, float, float]:
    """Mean with a two-sided Student-t interval using the sample standard deviation."""
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size < 2:
        raise TooFewValues(f"need at least 2 values, got {x.size}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    m = float(x.mean())
    s = float(x.std(ddof=1))
    half = float(stats.t.ppf((1.0 + level) / 2.0, x.size - 1)) * s / math.sqrt(x.size)
    return m, m - half, m + half


def one_tailed_paired_ttest(best, other) -> float:
    """p-value for H1: mean(best - other) > 0, floored at 1e-12.

    Zero-variance differences give the floor when the mean difference is
    positive, 1 when negative and 0.5 when zero.
    """
    a = np.asarray(best, dtype=np.float64).ravel()
    b = np.asarray(other, dtype=np.float64).ravel()
    if a.size != b.size:
        raise LengthMismatch(f"paired samples differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise TooFewValues("need at least 2 pairs")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return 0.5
        return P_FLOOR if mean > 0 else 1.0
    t = mean / (sd / math.sqrt(d.size))
    if t == 0.0:
        return 0.5
    return max(float(stats.t.sf(t, d.size - 1)), P_FLOOR)


def format_p(p: float) -> str:
    return "p<.001" if p < 0.001 else f"{p:.3f}"
