import numpy as np
import pytest

from gridwatch import detectors as det
from gridwatch.evaluation import SearchError, grid_search_cv
from gridwatch.features import DesignMatrix, FeatureConfig


def _matrix(X, y, task="classification"):
    n = X.shape[0]
    cfg = FeatureConfig("generators_only", 0, "target_only", task)
    return DesignMatrix(X=X, y=y.astype(float), labels=y.astype(bool), reported=np.zeros(n),
                        truth=np.zeros(n), rows=np.arange(n),
                        feature_names=tuple(f"f{i}" for i in range(X.shape[1])), config=cfg,
                        target="T")


@pytest.fixture
def blobs():
    rng = np.random.default_rng(0)
    y = rng.random(300) < 0.3
    X = rng.normal(size=(300, 2)) + 3.0 * y[:, None]
    return _matrix(X, y)


def test_singleton_grid(blobs):
    res = grid_search_cv("KNNC", det.HyperGrid("KNNC", {"k": [3]}), blobs, folds=5, seed=0)
    assert res.best_hyper == {"k": 3} and res.score_name == "f2"
    assert res.model.meta["cv_score"] == res.table[0]["mean_score"]
    assert res.audit["n_rows"] == 300


def test_dominant_point_wins():
    # only the 1-neighbour model can memorise a checkerboard of duplicates
    rng = np.random.default_rng(1)
    X = rng.integers(0, 40, size=(400, 1)).astype(float)
    y = (X[:, 0] % 2 == 0)
    res = grid_search_cv("KNNC", det.HyperGrid("KNNC", {"k": [1, 51]}), _matrix(X, y), 4, 0)
    assert res.best_hyper == {"k": 1}


def test_deterministic(blobs):
    grid = det.HyperGrid("KNNC", {"k": [1, 5, 9]})
    a = grid_search_cv("KNNC", grid, blobs, 5, seed=3)
    b = grid_search_cv("KNNC", grid, blobs, 5, seed=3)
    assert a.best_hyper == b.best_hyper and a.table == b.table
    assert np.array_equal(a.model.predict(blobs.X), b.model.predict(blobs.X))


def test_single_class_folds_skipped():
    X = np.arange(20, dtype=float)[:, None]
    y = np.zeros(20, bool)
    y[[0, 1, 9, 10]] = True
    folds = [np.arange(0, 8), np.arange(8, 16), np.arange(16, 20)]
    res = grid_search_cv("NBC", det.HyperGrid("NBC", {}), _matrix(X, y), folds, 0)
    assert [s["fold"] for s in res.skipped] == [2]
    assert len(res.table[0]["fold_scores"]) == 2
    with pytest.raises(SearchError):
        grid_search_cv("NBC", det.HyperGrid("NBC", {}), _matrix(X, np.zeros(20, bool)), 4, 0)


def test_folds_must_partition(blobs):
    with pytest.raises(ValueError):
        grid_search_cv("NBC", det.HyperGrid("NBC", {}), blobs, [np.arange(10), np.arange(5, 300)])


def test_regressor_scores_r2():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(1500, 2))
    y = X @ np.array([2.0, -1.0]) + 5.0
    res = grid_search_cv("MLPR", det.HyperGrid("MLPR", {"hidden_layers": [1], "width": [50]}),
                         _matrix(X, y, "regression"), 3, 0)
    assert res.score_name == "r2" and res.table[0]["mean_score"] > 0.95
