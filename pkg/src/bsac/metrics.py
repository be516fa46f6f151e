"""Confusion counts and the imbalance-aware metrics derived from them.

The positive class is 1 (default / minority).  Every ratio is computed as a
single division of integer counts, so each value is the correctly rounded
float of the exact rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

METRIC_NAMES = ("accuracy", "precision", "recall", "specificity", "f1", "g_mean")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float
    g_mean: float
    degenerate: tuple = field(default=())

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _binary(v, name):
    a = np.asarray(v).reshape(-1)
    if not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must contain only 0 and 1")
    return a.astype(bool)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = _binary(y_true, "y_true")
    p = _binary(y_pred, "y_pred")
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.size} vs {p.size}")
    return ConfusionMatrix(
        tp=int(np.sum(t & p)), fp=int(np.sum(~t & p)),
        tn=int(np.sum(~t & ~p)), fn=int(np.sum(t & ~p)),
    )


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Zero denominators give 0 and are listed in ``degenerate``."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    flagged = []

    def ratio(name, num, den):
        if den == 0:
            flagged.append(name)
            return 0.0
        return num / den

    tp, fp, tn, fn = cm.tp, cm.fp, cm.tn, cm.fn
    recall = ratio("recall", tp, tp + fn)
    specificity = ratio("specificity", tn, tn + fp)
    precision = ratio("precision", tp, tp + fp)
    if tp + fp == 0 or tp + fn == 0 or tp == 0:
        # harmonic mean undefined when either input is undefined or both are zero
        f1 = 0.0
        flagged.append("f1")
    else:
        f1 = 2 * tp / (2 * tp + fp + fn)
    if tp + fn == 0 or tn + fp == 0:
        g_mean = 0.0
        flagged.append("g_mean")
    else:
        g_mean = math.sqrt(tp * tn / ((tp + fn) * (tn + fp)))
    return MetricsReport(
        accuracy=(tp + tn) / cm.total, precision=precision, recall=recall,
        specificity=specificity, f1=f1, g_mean=g_mean, degenerate=tuple(flagged),
    )


def f1_score(y_true, y_pred) -> float:
    return metrics(confusion(y_true, y_pred)).f1
