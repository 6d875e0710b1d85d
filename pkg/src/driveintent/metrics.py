"""Confusion matrices and the accuracy/precision/recall/F1 metric family.

Per-class precision = TP/(TP+FP), recall = TP/(TP+FN), F1 their harmonic
mean, with 0/0 defined as 0. Reported precision/recall/F1 are macro
averages over the five classes; accuracy is trace/total. Values are
percentages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .labels import N_CLASSES, ManeuverLabel


def confusion(
    preds: list[ManeuverLabel], truths: list[ManeuverLabel]
) -> np.ndarray:
    if len(preds) != len(truths):
        raise ValueError("preds/truths length mismatch")
    if not preds:
        raise ValueError("empty prediction list")
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for p, t in zip(preds, truths):
        cm[t.index, p.index] += 1
    return cm


@dataclass
class MetricsRow:
    T: int | None
    accuracy: float
    precision: float
    recall: float
    f1: float

    def rounded(self) -> "MetricsRow":
        return MetricsRow(
            T=self.T,
            accuracy=round(self.accuracy, 2),
            precision=round(self.precision, 2),
            recall=round(self.recall, 2),
            f1=round(self.f1, 2),
        )


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def metrics_from_confusion(cm: np.ndarray, T: int | None = None) -> MetricsRow:
    cm = np.asarray(cm)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    precisions, recalls, f1s = [], [], []
    for c in range(cm.shape[0]):
        tp = int(cm[c, c])
        fp = int(cm[:, c].sum()) - tp
        fn = int(cm[c, :].sum()) - tp
        p = _safe_div(tp, tp + fp)
        r = _safe_div(tp, tp + fn)
        precisions.append(p)
        recalls.append(r)
        f1s.append(_safe_div(2 * p * r, p + r))
    accuracy = np.trace(cm) / total
    return MetricsRow(
        T=T,
        accuracy=100.0 * accuracy,
        precision=100.0 * float(np.mean(precisions)),
        recall=100.0 * float(np.mean(recalls)),
        f1=100.0 * float(np.mean(f1s)),
    )


def fold_mean_std(values: list[float]) -> tuple[float, float]:
    """Mean and sample standard deviation of per-fold accuracies."""
    mean = sum(values) / len(values)
    if len(values) < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)
