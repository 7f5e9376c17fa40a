"""Confusion counts, F2, precision/recall, R^2 and distribution summaries.

Undefined scores are returned as NaN, never as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNDEFINED = math.nan


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")
            object.__setattr__(self, name, int(v))

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionCounts":
        t = np.asarray(y_true, dtype=bool)
        p = np.asarray(y_pred, dtype=bool)
        if t.shape != p.shape:
            raise ValueError("y_true and y_pred differ in shape")
        return cls(
            tp=int(np.sum(t & p)),
            fp=int(np.sum(~t & p)),
            fn=int(np.sum(t & ~p)),
            tn=int(np.sum(~t & ~p)),
        )

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def f2_score(c: ConfusionCounts) -> float:
    """5 TP / (5 TP + 4 FN + FP); NaN when TP = FN = FP = 0."""
    den = 5 * c.tp + 4 * c.fn + c.fp
    if den == 0:
        return UNDEFINED
    return 5 * c.tp / den


def prf_metrics(c: ConfusionCounts) -> tuple[float, float]:
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else UNDEFINED
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else UNDEFINED
    return precision, recall


def r2_score(y_true, y_pred) -> float:
    y = np.asarray(y_true, dtype=np.float64)
    yhat = np.asarray(y_pred, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ValueError("y_true and y_pred must be 1-D and equally long")
    if y.size < 2:
        raise ValueError("R^2 needs at least two points")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return UNDEFINED
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def rmse(y_true, y_pred) -> float:
    d = np.asarray(y_true, dtype=np.float64) - np.asarray(y_pred, dtype=np.float64)
    return float(np.sqrt(np.mean(d * d)))


def summarize(values) -> dict:
    """min / quartiles / median / max over the finite values (box-plot data)."""
    v = np.asarray([x for x in values if x is not None], dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"n": 0, "min": None, "q1": None, "median": None, "q3": None, "max": None, "mean": None}
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return {
        "n": int(v.size),
        "min": float(v.min()),
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "max": float(v.max()),
        "mean": float(v.mean()),
    }
