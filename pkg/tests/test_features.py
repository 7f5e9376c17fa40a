import itertools
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_frame, small_grid
from gridwatch.attacks import inject_attacks
from gridwatch.features import (
    ContextScope,
    FeatureConfig,
    HistoryScope,
    Scaling,
    Task,
    build_dataset,
    feature_names,
    standardize,
    vector_size,
)
from gridwatch.grid_model import SeriesFrame
from oracles import feature_row

FROZEN = json.loads((Path(__file__).parent / "oracle_values.json").read_text())
ALL_CONFIGS = [
    FeatureConfig(c, h, s, t)
    for c, h, s, t in itertools.product(ContextScope, (0, 1, 4), HistoryScope, Task)
]


@pytest.mark.parametrize("case", FROZEN["vector_size"])
def test_vector_size_examples(case):
    grid = small_grid(case["N"], case["L"])
    cfg = FeatureConfig(case["context"], case["H"], case["history"], case["task"])
    assert vector_size(cfg, grid) == case["size"]


def test_config_key_and_roundtrip():
    cfg = FeatureConfig("generators_only", 24, "target_only", "regression")
    assert cfg.key == "gen-H24-tgt-reg"
    assert FeatureConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        FeatureConfig.from_dict({"history_len": 1})
    with pytest.raises(ValueError):
        FeatureConfig("generators_only", -1, "target_only", "regression")


@pytest.fixture
def ds5(grid5):
    return inject_attacks(random_frame(grid5, 60, seed=8), "P2", grid5, seed=1)


@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=lambda c: c.key)
def test_width_matches_vector_size_and_oracle(cfg, grid5, ds5):
    m = build_dataset(ds5, cfg, grid5)
    assert m.width == vector_size(cfg, grid5) == len(feature_names(cfg, grid5, "P2"))
    assert m.n_rows == 60
    context = [p for p in grid5.plant_ids if p != "P2"]
    for t in (0, 3, 59):
        want = feature_row(ds5.reported, ds5.truth, "P2", context, list(grid5.load_bus_ids), t,
                           cfg.history_len, cfg.task is Task.CLASSIFICATION,
                           cfg.history_scope is HistoryScope.FULL_CONTEXT,
                           cfg.context_scope is ContextScope.ALL_INJECTIONS)
        assert np.array_equal(m.X[t], want)


def test_h0_classification_is_generation_at_t(grid5, ds5):
    cfg = FeatureConfig("generators_only", 0, "target_only", "classification")
    m = build_dataset(ds5, cfg, grid5)
    order = ["P2"] + [p for p in grid5.plant_ids if p != "P2"]
    assert np.array_equal(m.X, ds5.reported.select(order))


def test_regression_never_leaks_truth(grid5, ds5):
    cfg = FeatureConfig("all_injections", 2, "full_context", "regression")
    m = build_dataset(ds5, cfg, grid5)
    assert np.array_equal(m.y, ds5.truth.column("P2"))
    # permuting the target's value at t (only) leaves X unchanged
    j = ds5.reported.index_of("P2")
    vals = np.array(ds5.reported.values)
    vals[:, j] = np.random.default_rng(0).permutation(vals[:, j])
    shuffled = type(ds5)(ds5.truth, SeriesFrame(0, ds5.reported.columns, vals), "P2",
                         ds5.labels, ds5.scenario)
    assert np.array_equal(build_dataset(shuffled, cfg, grid5).X, m.X)


def test_reported_history_option(grid5, ds5):
    cfg = FeatureConfig("generators_only", 1, "target_only", "classification")
    m = build_dataset(ds5, cfg, grid5, history_from="reported")
    rep = ds5.reported.column("P2")
    assert np.array_equal(m.X[:, 1], np.roll(rep, 1))


def test_no_wrap_drops_rows(grid5, ds5):
    cfg = FeatureConfig("generators_only", 4, "target_only", "regression")
    m = build_dataset(ds5, cfg, grid5, wrap=False)
    assert m.n_rows == 56 and m.rows[0] == 4
    with pytest.raises(ValueError):
        build_dataset(ds5, FeatureConfig("generators_only", 60, "target_only", "regression"),
                      grid5, wrap=False)


def test_rotation_gives_row_permutation(grid5):
    frame = random_frame(grid5, 40, seed=2)
    rolled = SeriesFrame(0, frame.columns, np.roll(frame.values, 7, axis=0))
    cfg = FeatureConfig("all_injections", 3, "full_context", "classification")
    ds = inject_attacks(frame, "P1", grid5, seed=0)
    plain = type(ds)(frame, frame, "P1", ds.labels, ds.scenario)
    shifted = type(ds)(rolled, rolled, "P1", np.roll(ds.labels, 7), ds.scenario)
    a = build_dataset(plain, cfg, grid5)
    b = build_dataset(shifted, cfg, grid5)
    assert np.array_equal(np.roll(a.X, 7, axis=0), b.X)


def test_standardize_examples():
    X = np.array([[0.0, 5.0], [2.0, 5.0]])
    s = Scaling.fit(X)
    assert np.array_equal(s.transform(X), np.array([[-1.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        s.transform(np.zeros((1, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 50), st.integers(1, 6), st.integers(0, 1000))
def test_standardized_means_vanish(n, d, seed):
    X = np.random.default_rng(seed).normal(3.0, 5.0, size=(n, d))
    Z = Scaling.fit(X).transform(X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-10)


def test_standardize_matrix_reuses_stats(grid5, ds5):
    cfg = FeatureConfig("generators_only", 1, "target_only", "classification")
    m = build_dataset(ds5, cfg, grid5)
    a = standardize(m.take(np.arange(30)))
    b = standardize(m.take(np.arange(30, 60)), a.scaling)
    assert b.scaling is a.scaling
    assert np.allclose(b.X, (m.X[30:] - a.scaling.mean) / a.scaling.scale)
