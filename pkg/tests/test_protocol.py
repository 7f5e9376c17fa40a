import math

import numpy as np
import pytest

from gridwatch import detectors as det
from gridwatch.attacks import n_attacked
from gridwatch.evaluation import (CombinationBudgetError, evaluate_detector, evaluate_plant,
                                  robustness_scan, run_plant, train_plant)
from gridwatch.features import FeatureConfig, build_dataset
from oracles import n_combinations

CFG = FeatureConfig("generators_only", 1, "target_only", "classification")


class _Oracle:
    """Classifier stand-in that reads the ground truth from a lookup."""

    def __init__(self, lookup):
        self.lookup = lookup

    def predict(self, X):
        return self.lookup(X)


class _Truth:
    def __init__(self, truth_col):
        self.col = truth_col

    def decision(self, X):
        return self.col(X)

    predict = decision


def test_perfect_classifier(tiny):
    m = build_dataset(tiny["dataset"], CFG, tiny["grid"], rows=tiny["split"].test)
    flags = dict(zip(map(bytes, m.X), m.labels))
    model = det.TrainedModel("NBC", _Oracle(lambda X: np.array([flags[bytes(r)] for r in X])), {}, m.width)
    res = evaluate_detector(model, m, 100.0)
    assert res.f2 == 1.0 and res.precision == 1.0 and res.recall == 1.0


def test_exact_regressor(tiny):
    ds, grid = tiny["dataset"], tiny["grid"]
    cfg = CFG.with_task("regression")
    m = build_dataset(ds, cfg, grid, rows=tiny["split"].test)
    truth = dict(zip(map(bytes, m.X), m.truth))
    model = det.TrainedModel("MLPR", _Truth(lambda X: np.array([truth[bytes(r)] for r in X])), {}, m.width)
    rated = grid.rated(ds.target)
    res = evaluate_detector(det.ResidualDetector(model, 1.0, rated), m, rated)
    assert res.precision == 1.0 and res.recall == 1.0 and res.r2 == 1.0
    assert res.error_rate == 0.0 and res.relative_error == 0.0


def test_run_plant_keeps_test_rows_out(tiny):
    ds, grid, split = tiny["dataset"], tiny["grid"], tiny["split"]
    run = run_plant(ds, grid, CFG, "NBC", det.HyperGrid.default("NBC"), split, seed=0)
    assert run.search.audit["test_rows_in_training"] == 0
    assert run.search.audit["n_rows"] == split.train.size
    assert run.result.confusion.tp + run.result.confusion.fn == int(ds.labels[split.test].sum())
    again = evaluate_plant(run.detector, ds, grid, CFG, split)
    assert again.to_dict() == run.result.to_dict()


def test_regressor_uses_holdout(tiny):
    ds, grid, split = tiny["dataset"], tiny["grid"], tiny["split"]
    hg = det.HyperGrid("MLPR", {"hidden_layers": [1], "width": [10]})
    detector, search = train_plant(ds, grid, CFG, "MLPR", hg, split)
    assert isinstance(detector, det.ResidualDetector)
    assert search.audit["n_rows"] == split.fit.size
    res = evaluate_plant(detector, ds, grid, CFG, split)
    assert res.threshold == detector.threshold and res.r2 is not None


@pytest.fixture(scope="module")
def knn_run(tiny):
    return run_plant(tiny["dataset"], tiny["grid"], CFG, "KNNC",
                     det.HyperGrid("KNNC", {"k": [3]}), tiny["split"])


def test_robustness_baseline_when_no_context(tiny, knn_run):
    ds, grid, split = tiny["dataset"], tiny["grid"], tiny["split"]
    rep = robustness_scan(knn_run.detector, ds, grid, CFG, split.test, [], m_max=3)
    assert rep["per_m"] == {} and rep["baseline"]["f2"] == knn_run.result.f2
    rep0 = robustness_scan(knn_run.detector, ds, grid, CFG, split.test, ["H02"], m_max=0)
    assert rep0["combinations"] == [] and rep0["baseline"] == knn_run.result.to_dict()


def test_robustness_exhaustive_and_greedy(tiny, knn_run):
    ds, grid, split = tiny["dataset"], tiny["grid"], tiny["split"]
    ctx = [p for p in grid.plant_ids if p != ds.target]
    ex = robustness_scan(knn_run.detector, ds, grid, CFG, split.test, ctx, m_max=2)
    for m in (1, 2):
        assert ex["per_m"][str(m)]["n_combinations"] == n_combinations(len(ctx), m)
    gr = robustness_scan(knn_run.detector, ds, grid, CFG, split.test, ctx, m_max=2,
                         mode="worst_case_greedy")
    assert gr["worst_case"]["1"]["f2"] <= ex["per_m"]["1"]["f2"]["median"]
    again = robustness_scan(knn_run.detector, ds, grid, CFG, split.test, ctx, m_max=2)
    assert again == ex


def test_combination_budget(tiny, knn_run):
    ds, grid, split = tiny["dataset"], tiny["grid"], tiny["split"]
    ctx = [p for p in grid.plant_ids if p != ds.target]
    with pytest.raises(CombinationBudgetError):
        robustness_scan(knn_run.detector, ds, grid, CFG, split.test, ctx, m_max=2,
                        max_combinations=2)
    assert sum(n_combinations(35, m) for m in (1, 2, 3)) == 7175


def test_attack_count(tiny):
    ds = tiny["dataset"]
    assert int(ds.labels.sum()) == n_attacked(ds.reported.n_steps, 0.1)
    assert not math.isnan(tiny["split"].test.size)
