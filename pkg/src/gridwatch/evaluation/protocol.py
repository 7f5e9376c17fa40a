"""Per-plant train / threshold / test protocol and the EvalResult record."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gridwatch import detectors as det
from gridwatch.attacks import LabeledDataset
from gridwatch.evaluation.metrics import (
    ConfusionCounts,
    f2_score,
    prf_metrics,
    r2_score,
    rmse,
)
from gridwatch.evaluation.search import SearchResult, grid_search_cv
from gridwatch.evaluation.splits import SplitPlan
from gridwatch.features import DesignMatrix, FeatureConfig, Task, build_dataset
from gridwatch.grid_model import GridSpec

DEFAULT_BAND_MW = 50.0


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else None


@dataclass
class EvalResult:
    plant: str
    algo: str
    config: FeatureConfig
    hyper: dict
    f2: float
    precision: float
    recall: float
    confusion: ConfusionCounts
    seed: int
    train_seconds: float = 0.0
    r2: float | None = None
    relative_error: float | None = None
    threshold: float | None = None
    error_rate: float | None = None
    cv_score: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def key(self) -> tuple:
        return (self.plant, self.config.key, self.algo)

    def to_dict(self, timing: bool = False) -> dict:
        doc = {
            "plant": self.plant,
            "algo": self.algo,
            "config": self.config.to_dict(),
            "config_key": self.config.key,
            "hyper": self.hyper,
            "f2": _num(self.f2),
            "precision": _num(self.precision),
            "recall": _num(self.recall),
            "confusion": self.confusion.to_dict(),
            "r2": _num(self.r2),
            "relative_error": _num(self.relative_error),
            "threshold": _num(self.threshold),
            "error_rate": _num(self.error_rate),
            "cv_score": _num(self.cv_score),
            "seed": self.seed,
        }
        if self.extra:
            doc["extra"] = self.extra
        if timing:
            doc["train_seconds"] = self.train_seconds
        return doc


def evaluate_detector(detector, test: DesignMatrix, rated: float, seed: int = 0,
                      band_mw: float | None = DEFAULT_BAND_MW) -> EvalResult:
    """Score a trained classifier or ResidualDetector on held-out rows."""
    if isinstance(detector, det.ResidualDetector):
        if test.config.task is not Task.REGRESSION:
            raise ValueError("residual detector needs a regression design matrix")
        pred = detector.predict_clipped(test.X)
        flagged = np.abs(test.reported - pred) > detector.threshold
        model = detector.regressor
        r2 = r2_score(test.truth, pred) if test.n_rows >= 2 else None
        rel = rmse(test.truth, pred) / rated
        err_rate = float(np.mean(np.abs(pred - test.truth) > band_mw)) if band_mw else None
        threshold = detector.threshold
    else:
        model = detector
        flagged = np.asarray(det.classify(model, test.X), dtype=bool)
        r2 = rel = err_rate = threshold = None
    c = ConfusionCounts.from_predictions(test.labels, flagged)
    precision, recall = prf_metrics(c)
    return EvalResult(
        plant=test.target,
        algo=model.algo,
        config=test.config,
        hyper=dict(model.hyper),
        f2=f2_score(c),
        precision=precision,
        recall=recall,
        confusion=c,
        seed=seed,
        train_seconds=float(model.meta.get("train_seconds", 0.0)),
        r2=r2,
        relative_error=rel,
        threshold=threshold,
        error_rate=err_rate,
        cv_score=model.meta.get("cv_score"),
    )


def positions(matrix: DesignMatrix, rows: np.ndarray) -> np.ndarray:
    """Positions in ``matrix`` of the given time rows (rows absent are dropped)."""
    lookup = np.full(int(matrix.rows.max()) + 1, -1, dtype=np.int64)
    lookup[matrix.rows] = np.arange(matrix.n_rows)
    rows = np.asarray(rows, dtype=np.int64)
    rows = rows[rows < lookup.size]
    pos = lookup[rows]
    return pos[pos >= 0]


@dataclass
class PlantRun:
    result: EvalResult
    detector: object
    search: SearchResult


def task_config(config: FeatureConfig, algo: str) -> FeatureConfig:
    return config.with_task(Task.REGRESSION if algo in det.REGRESSORS else Task.CLASSIFICATION)


def train_plant(dataset: LabeledDataset, grid: GridSpec, config: FeatureConfig, algo: str,
                hyper_grid, split: SplitPlan, seed: int = 0, workers: int = 1,
                matrix: DesignMatrix | None = None):
    """Search and refit one algorithm on the training rows of one plant.

    Classifiers use all training rows; the regressor uses the fit rows and
    then gets its threshold on the holdout.  Returns (detector, search).
    """
    regression = algo in det.REGRESSORS
    config = task_config(config, algo)
    if matrix is None or matrix.config != config:
        matrix = build_dataset(dataset, config, grid)
    if regression:
        train_rows, fold_rows = split.fit, split.folds
    else:
        train_rows, fold_rows = split.train, split.supervised_folds
    train = matrix.take(positions(matrix, train_rows))
    overlap = int(np.intersect1d(train.rows, split.test).size)
    if overlap:
        raise AssertionError(f"{overlap} training rows overlap the test set")
    folds = [positions(train, f) for f in fold_rows]
    search = grid_search_cv(algo, hyper_grid, train, folds, seed, workers)
    search.audit["test_rows_in_training"] = overlap
    if regression:
        hold = matrix.take(positions(matrix, split.holdout))
        detector = det.fit_threshold(search.model, hold.X, hold.reported, hold.labels,
                                     grid.rated(dataset.target))
    else:
        detector = search.model
    return detector, search


def evaluate_plant(detector, dataset: LabeledDataset, grid: GridSpec, config: FeatureConfig,
               split: SplitPlan, seed: int = 0, band_mw: float = DEFAULT_BAND_MW) -> EvalResult:
    model = detector.regressor if isinstance(detector, det.ResidualDetector) else detector
    config = task_config(config, model.algo)
    test = build_dataset(dataset, config, grid, rows=split.test)
    return evaluate_detector(detector, test, grid.rated(dataset.target), seed, band_mw)


def run_plant(dataset: LabeledDataset, grid: GridSpec, config: FeatureConfig, algo: str,
              hyper_grid, split: SplitPlan, seed: int = 0, workers: int = 1,
              matrix: DesignMatrix | None = None, band_mw: float = DEFAULT_BAND_MW) -> PlantRun:
    """Search, refit, (threshold,) and test one algorithm on one plant."""
    config = task_config(config, algo)
    if matrix is None or matrix.config != config:
        matrix = build_dataset(dataset, config, grid)
    detector, search = train_plant(dataset, grid, config, algo, hyper_grid, split, seed,
                                   workers, matrix)
    test = matrix.take(positions(matrix, split.test))
    result = evaluate_detector(detector, test, grid.rated(dataset.target), seed, band_mw)
    return PlantRun(result, detector, search)
