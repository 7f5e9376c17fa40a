"""Regressor + threshold: flag a step when |reported - predicted| > tau."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gridwatch.detectors.base import TrainedModel


class ThresholdError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ResidualDetector:
    regressor: TrainedModel
    threshold: float
    rated: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if self.regressor.task != "regression":
            raise ValueError("ResidualDetector needs a regression model")

    def predict_clipped(self, X):
        return np.clip(self.regressor.predict(X), 0.0, self.rated)

    def residuals(self, X, reported):
        return np.abs(np.asarray(reported, dtype=np.float64) - self.predict_clipped(X))

    def detect(self, X, reported):
        return self.residuals(X, reported) > self.threshold


def threshold_candidates(residuals):
    """Candidate thresholds with the flag set each induces.

    Returns (taus, first) where flagging ``residual >= u[first[i]]`` (u the
    sorted unique residuals) is what ``residual > taus[i]`` selects.  One
    candidate per gap between consecutive unique residuals (its midpoint),
    plus half the smallest residual to cover "flag everything".
    """
    u = np.unique(residuals)
    taus = list((u[:-1] + u[1:]) / 2.0)
    first = list(range(1, u.size))
    if u[0] > 0:
        taus.insert(0, u[0] / 2.0)
        first.insert(0, 0)
    return np.asarray(taus), np.asarray(first, dtype=np.int64), u


def best_threshold(residuals, labels):
    """(tau, f2, separating) maximising F2; ties go to the larger tau."""
    residuals = np.asarray(residuals, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if residuals.shape != labels.shape:
        raise ValueError("residuals and labels differ in length")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ThresholdError("holdout has no anomalous rows")
    taus, first, u = threshold_candidates(residuals)
    if taus.size == 0:
        raise ThresholdError("all residuals are zero; no positive threshold separates anything")
    pos = np.searchsorted(u, residuals)
    # counts of rows with residual >= u[j]
    pos_ge = np.cumsum(np.bincount(pos[labels], minlength=u.size)[::-1])[::-1]
    neg_ge = np.cumsum(np.bincount(pos[~labels], minlength=u.size)[::-1])[::-1]
    tp = pos_ge[first].astype(np.float64)
    fp = neg_ge[first].astype(np.float64)
    fn = n_pos - tp
    f2 = 5 * tp / (5 * tp + 4 * fn + fp)
    best = np.flatnonzero(f2 == f2.max())[-1]
    return float(taus[best]), float(f2[best]), bool(u.size > 1)


def fit_threshold(model: TrainedModel, X, reported, labels, rated: float) -> ResidualDetector:
    det = ResidualDetector(model, 1.0, rated)
    res = det.residuals(X, reported)
    tau, f2, separating = best_threshold(res, labels)
    meta = {"holdout_f2": f2, "separating": separating, "holdout_rows": int(res.size)}
    return ResidualDetector(model, tau, rated, meta)
