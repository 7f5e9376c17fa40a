"""Cross-validated hyperparameter search with refit."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from gridwatch import detectors as det
from gridwatch.evaluation.metrics import ConfusionCounts, f2_score, r2_score
from gridwatch.features import DesignMatrix
from gridwatch.parallel import pmap

log = logging.getLogger(__name__)


class SearchError(RuntimeError):
    pass


@dataclass
class SearchResult:
    algo: str
    best_hyper: dict
    model: det.TrainedModel
    score_name: str
    table: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    audit: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "algo": self.algo,
            "best_hyper": self.best_hyper,
            "score_name": self.score_name,
            "table": self.table,
            "skipped": self.skipped,
            "audit": self.audit,
        }


def row_digest(rows: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(rows, dtype=np.int64).tobytes()).hexdigest()[:16]


def _fold_unit(unit, algo, X, y, seed):
    """Score of one (grid point, fold); None plus a reason if the fold is unusable."""
    hyper, train_pos, val_pos = unit
    regression = algo in det.REGRESSORS
    if regression:
        model = det.train_regressor(algo, X[train_pos], y[train_pos], hyper, seed)
        score = r2_score(y[val_pos], model.predict(X[val_pos]))
        return (score, None) if np.isfinite(score) else (None, "constant validation target")
    ytr = y[train_pos].astype(bool)
    if ytr.all() or not ytr.any():
        return None, "single-class training labels"
    if y[val_pos].astype(bool).all() or not y[val_pos].astype(bool).any():
        return None, "single-class validation labels"
    model = det.train_classifier(algo, X[train_pos], ytr, hyper, seed)
    c = ConfusionCounts.from_predictions(y[val_pos].astype(bool), model.predict(X[val_pos]))
    score = f2_score(c)
    return (score, None) if np.isfinite(score) else (None, "undefined F2")


def grid_search_cv(algo: str, hyper_grid, matrix: DesignMatrix, folds=5, seed: int = 0,
                   workers: int = 1) -> SearchResult:
    """Pick the grid point with the best mean fold score (F2 for
    classifiers, R^2 for regressors), then refit it on every row of ``matrix``.

    ``folds`` is either a fold count or a sequence of position arrays into
    ``matrix`` that partition its rows.  Ties go to the simpler model.
    """
    points = hyper_grid.points() if isinstance(hyper_grid, det.HyperGrid) else list(hyper_grid)
    if not points:
        raise ValueError("hyper_grid is empty")
    n = matrix.n_rows
    if isinstance(folds, int):
        rng = np.random.default_rng(seed)
        folds = [np.sort(f) for f in np.array_split(rng.permutation(n), folds)]
    folds = [np.asarray(f, dtype=np.int64) for f in folds]
    allpos = np.concatenate(folds)
    if allpos.size != n or np.unique(allpos).size != n:
        raise ValueError("folds must partition the matrix rows")
    regression = algo in det.REGRESSORS
    units = []
    for hyper in points:
        for k, val in enumerate(folds):
            train = np.concatenate([f for j, f in enumerate(folds) if j != k])
            units.append((hyper, np.sort(train), val))
    fn = partial(_fold_unit, algo=algo, X=matrix.X, y=matrix.y, seed=seed)
    outcomes = pmap(fn, units, workers)

    table, skipped = [], []
    nf = len(folds)
    for i, hyper in enumerate(points):
        scores = []
        for k in range(nf):
            score, reason = outcomes[i * nf + k]
            if score is None:
                skipped.append({"point": i, "fold": k, "reason": reason})
            else:
                scores.append(score)
        table.append({
            "hyper": hyper,
            "fold_scores": scores,
            "mean_score": float(np.mean(scores)) if scores else None,
            "complexity": det.complexity(algo, hyper, matrix.width),
        })
    usable = [i for i, row in enumerate(table) if row["mean_score"] is not None]
    if not usable:
        raise SearchError(f"{algo}: every fold was unusable")
    best = min(usable, key=lambda i: (-table[i]["mean_score"], table[i]["complexity"], i))
    best_hyper = points[best]
    if regression:
        model = det.train_regressor(algo, matrix.X, matrix.y, best_hyper, seed)
    else:
        model = det.train_classifier(algo, matrix.X, matrix.y.astype(bool), best_hyper, seed)
    model.meta["cv_score"] = table[best]["mean_score"]
    audit = {"n_rows": n, "row_digest": row_digest(matrix.rows)}
    log.info("%s: best %s (mean %s %.4f) over %d points", algo, best_hyper,
             "R2" if regression else "F2", table[best]["mean_score"], len(points))
    return SearchResult(algo, best_hyper, model, "r2" if regression else "f2", table, skipped, audit)
