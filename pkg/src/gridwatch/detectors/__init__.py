"""Classifiers, the MLP regressor and the residual-threshold detector."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from gridwatch.detectors.base import (
    CLASSIFIERS,
    REGRESSORS,
    SCALED_ALGOS,
    TrainedModel,
    TrainingError,
    load_model,
    save_model,
)
from gridwatch.detectors.knn import KNNClassifier
from gridwatch.detectors.mlp import MLP
from gridwatch.detectors.naive_bayes import GaussianNB
from gridwatch.detectors.residual import (
    ResidualDetector,
    ThresholdError,
    best_threshold,
    fit_threshold,
)
from gridwatch.detectors.svm import LinearSVC
from gridwatch.detectors.trees import GradientBoosting, RandomForest
from gridwatch.features import Scaling

ALGOS = CLASSIFIERS + REGRESSORS

# Default search grids over the supported hyperparameter ranges.
DEFAULT_GRIDS = {
    "NBC": {},
    "KNNC": {"k": [1, 2, 5, 10, 20, 50, 100, 200, 500]},
    "SVC": {"C": [300, 3000, 30000]},
    "RFC": {"trees": [20, 40, 60, 80, 100]},
    "GBC": {"stages": [10, 100, 1000]},
    "MLPC": {"hidden_layers": [1, 2, 3, 4], "width": [50, 200, 1000]},
    "MLPR": {"hidden_layers": [1, 2, 3, 4], "width": [50, 200, 1000, 5000]},
}

_LIMITS = {
    "k": (1, 500),
    "C": (300, 30000),
    "trees": (20, 100),
    "stages": (10, 1000),
    "hidden_layers": (1, 4),
}


def estimator_class(algo):
    return {
        "NBC": GaussianNB,
        "KNNC": KNNClassifier,
        "SVC": LinearSVC,
        "RFC": RandomForest,
        "GBC": GradientBoosting,
        "MLPC": _MLPFactory("classification"),
        "MLPR": _MLPFactory("regression"),
        "CONST": ConstantClassifier,
    }[algo]


class _MLPFactory:
    def __init__(self, task):
        self.task = task

    def from_hyper(self, hyper, seed):
        return MLP.from_hyper(hyper, seed, self.task)

    def from_state(self, hyper, state):
        return MLP.from_state(hyper, state, self.task)

    def complexity(self, hyper, n_features):
        return MLP.complexity(hyper, n_features)


class ConstantClassifier:
    """Degenerate model for single-class training labels (opt-in only)."""

    def __init__(self, label):
        self.label = bool(label)

    @classmethod
    def from_state(cls, hyper, state):
        return cls(state["label"])

    def decision(self, X):
        return np.full(X.shape[0], 1.0 if self.label else 0.0)

    def predict(self, X):
        return np.full(X.shape[0], self.label)

    def get_state(self):
        return {"label": self.label}


@dataclass(frozen=True)
class HyperGrid:
    algo: str
    params: dict

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        for name, values in self.params.items():
            if name == "width":
                cap = 5000 if self.algo == "MLPR" else 1000
                lim = (1, cap)
            else:
                lim = _LIMITS.get(name)
            if lim is None:
                continue
            for v in values:
                if not lim[0] <= v <= lim[1]:
                    raise ValueError(f"{self.algo} {name}={v} outside [{lim[0]}, {lim[1]}]")

    @classmethod
    def default(cls, algo):
        return cls(algo, dict(DEFAULT_GRIDS[algo]))

    def points(self) -> list[dict]:
        names = sorted(self.params)
        if not names:
            return [{}]
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.params[n] for n in names))]


def complexity(algo, hyper, n_features):
    return estimator_class(algo).complexity(hyper, n_features)


def _check_inputs(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise TrainingError(f"bad shapes X{X.shape} y{y.shape}")
    if X.shape[0] == 0:
        raise TrainingError("no training rows")
    if not np.all(np.isfinite(X)):
        raise TrainingError("non-finite feature values")
    return X, y


def _fit(algo, X, y, hyper, seed, scale):
    scale = algo in SCALED_ALGOS if scale is None else scale
    scaling = Scaling.fit(X) if scale else None
    Xs = scaling.transform(X) if scaling is not None else X
    est = estimator_class(algo).from_hyper(dict(hyper), seed)
    t0 = time.perf_counter()
    est.fit(Xs, y)
    elapsed = time.perf_counter() - t0
    meta = {"seed": seed, "train_seconds": elapsed, "n_rows": int(X.shape[0])}
    for attr in ("epochs_run", "best_epoch", "converged"):
        if hasattr(est, attr):
            meta[attr] = getattr(est, attr)
    if hasattr(est, "train_loss"):
        meta["train_loss"] = list(est.train_loss)
    return TrainedModel(algo, est, dict(hyper), X.shape[1], scaling, meta)


def train_classifier(algo, X, y, hyper=None, seed=0, scale=None, allow_single_class=False):
    """Fit one of NBC/KNNC/SVC/RFC/GBC/MLPC on raw features.

    Standardization is fitted here (for KNNC, SVC, MLPC by default) and
    stored in the returned model.
    """
    if algo not in CLASSIFIERS:
        raise ValueError(f"{algo!r} is not a classifier")
    X, y = _check_inputs(X, y)
    if not np.all((y == 0) | (y == 1)):
        raise TrainingError("classification labels must be 0/1")
    y = y.astype(bool)
    if y.all() or not y.any():
        if not allow_single_class:
            raise TrainingError("training labels contain a single class")
        return TrainedModel("CONST", ConstantClassifier(y[0]), {}, X.shape[1], None,
                            {"seed": seed, "train_seconds": 0.0, "n_rows": int(X.shape[0])})
    return _fit(algo, X, y, hyper or {}, seed, scale)


def classify(model: TrainedModel, x):
    """Anomaly label(s): True = anomalous.  Accepts one vector or a batch."""
    if model.task != "classification" and model.algo != "CONST":
        raise ValueError("classify needs a classification model")
    return model.predict(x)


def train_regressor(algo, X, y, hyper=None, seed=0, scale=None):
    if algo not in REGRESSORS:
        raise ValueError(f"{algo!r} is not a regressor")
    X, y = _check_inputs(X, y)
    y = y.astype(np.float64)
    if not np.all(np.isfinite(y)):
        raise TrainingError("non-finite regression targets")
    return _fit(algo, X, y, hyper or {}, seed, scale)


def predict_value(model: TrainedModel, x):
    if model.task != "regression":
        raise ValueError("predict_value needs a regression model")
    return model.predict(x)


def detect_residual(det: ResidualDetector, x, reported):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return bool(det.detect(x[None, :], [reported])[0])
    return det.detect(x, reported)


def save_detector(detector, path):
    """Save a classifier model, or a residual detector as its regressor plus
    a ``<path>.threshold.json`` sidecar."""
    from pathlib import Path

    from gridwatch.dataio import write_json

    path = Path(path)
    if isinstance(detector, ResidualDetector):
        save_model(detector.regressor, path)
        write_json(path.with_name(path.name + ".threshold.json"),
                   {"threshold": detector.threshold, "rated": detector.rated,
                    "meta": {k: v for k, v in detector.meta.items() if k != "train_seconds"}})
    else:
        save_model(detector, path)
    return path


def load_detector(path):
    from pathlib import Path

    from gridwatch.dataio import read_json

    path = Path(path)
    model = load_model(path)
    side = path.with_name(path.name + ".threshold.json")
    if model.task == "regression":
        doc = read_json(side)
        return ResidualDetector(model, float(doc["threshold"]), float(doc["rated"]), doc.get("meta", {}))
    return model


__all__ = [
    "ALGOS", "CLASSIFIERS", "REGRESSORS", "DEFAULT_GRIDS", "HyperGrid", "TrainedModel",
    "TrainingError", "ResidualDetector", "ThresholdError", "train_classifier", "classify",
    "train_regressor", "predict_value", "fit_threshold", "detect_residual", "best_threshold",
    "save_model", "load_model", "save_detector", "load_detector", "complexity",
]
