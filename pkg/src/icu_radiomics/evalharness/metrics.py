"""ROC analysis: AUC, ROC curves and the operating point at a PPV target."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from ..errors import LengthMismatch, SingleClass


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if s.size != y.size:
        raise LengthMismatch(f"{s.size} scores for {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    n1 = int(y.sum())
    if n1 == 0 or n1 == y.size:
        raise SingleClass("both classes must be present")
    if np.isnan(s).any():
        raise ValueError("scores contain NaN")
    return s, y


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(s+ > s-) + P(s+ = s-)/2.

    Midranks are half-integers, so the U statistic is exact in floating
    point and the result equals the pairwise count divided by n+ n-.
    """
    s, y = _check(scores, labels)
    n1 = int(y.sum())
    n0 = y.size - n1
    ranks = rankdata(s, method="average")
    u = float(ranks[y == 1].sum()) - n1 * (n1 + 1) / 2.0
    return u / (n1 * n0)


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ROC points for thresholds at each distinct score (predict positive if s >= t).

    Returns (fpr, tpr, thresholds), starting at (0, 0) with threshold +inf.
    """
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(1 - y_sorted)
    last = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), s.size - 1]
    n1 = tp[-1]
    n0 = fp[-1]
    fpr = np.r_[0.0, fp[last] / n0]
    tpr = np.r_[0.0, tp[last] / n1]
    thr = np.r_[np.inf, s_sorted[last]]
    return fpr, tpr, thr


def interpolate_roc(fpr: np.ndarray, tpr: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """TPR at each grid FPR, linear between ROC points; the top of vertical runs."""
    out = np.empty(grid.size)
    for i, g in enumerate(grid):
        j = int(np.searchsorted(fpr, g, side="right")) - 1
        if fpr[j] == g or j == fpr.size - 1:
            out[i] = tpr[j]
        else:
            f0, f1 = fpr[j], fpr[j + 1]
            out[i] = tpr[j] + (tpr[j + 1] - tpr[j]) * (g - f0) / (f1 - f0)
    return out


FPR_GRID = np.round(np.arange(101) * 0.01, 2)


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    sensitivity: float
    specificity: float
    accuracy: float
    ppv: float

    def as_dict(self) -> dict:
        return asdict(self)


def confusion_at(scores, labels, threshold: float) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) when predicting positive for score >= threshold."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    tn = int(np.sum(~pred & (y == 0)))
    return tp, fp, tn, fn


def sensitivity_at_ppv(scores, labels, ppv_target: float = 0.70) -> OperatingPoint | None:
    """Most sensitive threshold whose PPV reaches ``ppv_target``.

    Candidate thresholds are the distinct scores; ties in sensitivity go to
    the higher threshold. Returns None when no threshold qualifies.
    """
    if not 0.0 <= ppv_target <= 1.0:
        raise ValueError(f"ppv_target must lie in [0, 1], got {ppv_target}")
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(1 - y_sorted)
    last = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), s.size - 1]
    n1 = int(tp[-1])
    n0 = int(fp[-1])
    best = None
    for j in last:  # descending thresholds
        t_p, f_p = int(tp[j]), int(fp[j])
        if t_p / (t_p + f_p) < ppv_target:
            continue
        if best is None or t_p > best[1]:
            best = (j, t_p, f_p)
    if best is None:
        return None
    j, t_p, f_p = best
    tn = n0 - f_p
    return OperatingPoint(
        threshold=float(s_sorted[j]),
        sensitivity=t_p / n1,
        specificity=tn / n0,
        accuracy=(t_p + tn) / (n1 + n0),
        ppv=t_p / (t_p + f_p),
    )
