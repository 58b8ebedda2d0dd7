"""ROC curves and trapezoidal AUC with explicit tie handling.

Thresholds sweep the distinct score values in descending order, so all
samples sharing a score cross the threshold together. With that grouping
the trapezoidal area equals the pairwise-comparison statistic
P(score+ > score-) + 0.5 * P(score+ = score-) exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import SingleClass


@dataclass(frozen=True)
class ROCCurve:
    """Ordered (fpr, tpr) points from (0,0) to (1,1) plus the sweep thresholds."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # distinct scores descending, one per point after (0,0)
    auc: float = field(default=0.0)

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["fpr", "tpr", "threshold"])
            # the (0,0) anchor has no finite threshold
            w.writerow([0.0, 0.0, ""])
            for f, t, th in zip(self.fpr[1:], self.tpr[1:], self.thresholds):
                w.writerow([repr(float(f)), repr(float(t)), repr(float(th))])


def roc_curve(scores, labels) -> ROCCurve:
    """ROC of ``scores`` against binary ``labels`` (1 = positive).

    Raises SingleClass when only one class is present.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if s.shape != y.shape:
        raise ValueError(f"scores and labels disagree: {s.shape} vs {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be binary 0/1")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClass()

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]

    # indices where a run of equal scores ends
    distinct = np.nonzero(np.diff(s_sorted))[0]
    boundary = np.concatenate([distinct, [s_sorted.size - 1]])

    tp = np.cumsum(y_sorted)[boundary]
    fp = (boundary + 1) - tp

    fpr = np.concatenate([[0.0], fp / n_neg])
    tpr = np.concatenate([[0.0], tp / n_pos])
    thresholds = s_sorted[boundary]
    auc = float(np.trapezoid(tpr, fpr))
    return ROCCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)


def pairwise_auc(scores, labels) -> float:
    """Brute-force ranking statistic: P(s+ > s-) + 0.5 P(s+ = s-).

    Quadratic in the sample size; kept as the independent cross-check for
    the trapezoidal path.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    pos = s[y == 1]
    neg = s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise SingleClass()
    gt = (pos[:, None] > neg[None, :]).sum()
    eq = (pos[:, None] == neg[None, :]).sum()
    return float((gt + 0.5 * eq) / (pos.size * neg.size))
