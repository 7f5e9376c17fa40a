"""Acceptance checks; each test reports one pass/fail line in the summary."""

import json
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import small_grid
from gridwatch import datagen
from gridwatch import detectors as det
from gridwatch.attacks import enumerate_concurrent, inject_attacks, n_attacked
from gridwatch.cli import main
from gridwatch.detectors.mlp import init_params, loss_and_grads
from gridwatch.evaluation import (ConfusionCounts, f2_score, make_split, robustness_scan,
                                  run_plant)
from gridwatch.evaluation.report import strip_timing
from gridwatch.features import ContextScope, FeatureConfig, HistoryScope, Task, build_dataset, vector_size
from gridwatch.grid_model import SeriesFrame
from oracles import best_f2_scan, f2_exact


def test_c01_f2_oracle(criterion):
    t0 = time.perf_counter()
    rnd = random.Random(1)
    bad = 0
    for _ in range(1000):
        tp, fn, fp = rnd.randint(1, 10**6), rnd.randint(0, 10**6), rnd.randint(0, 10**6)
        if Fraction(f2_score(ConfusionCounts(tp, fp, fn, 0))) != Fraction(float(f2_exact(tp, fn, fp))):
            bad += 1
        elif f2_score(ConfusionCounts(tp, fp, fn, 0)) != float(Fraction(5 * tp, 5 * tp + 4 * fn + fp)):
            bad += 1
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 1.0
    criterion(1, "F2 oracle", ok, f"({bad} mismatches, {dt:.2f}s)")
    assert ok


def test_c02_attack_model(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    failures = []
    for i in range(100):
        rated = float(rng.uniform(1.0, 1000.0))
        n = int(rng.integers(10, 500))
        grid = small_grid(3, 2, rated)
        gen = rng.uniform(0.0, rated, size=(n, 3))
        gen[rng.random((n, 3)) < 0.05] = rated / 2
        frame = SeriesFrame(0, grid.column_ids, np.hstack([rng.uniform(1, 9, (n, 2)), gen]))
        target = f"P{i % 3}"
        ds = inject_attacks(frame, target, grid, 0.10, seed=i)
        j = frame.index_of(target)
        rep, tru = ds.reported.values[ds.labels, j], ds.truth.values[ds.labels, j]
        if not (np.all((rep == 0) | (rep == rated)) and np.all(np.abs(rep - tru) >= rated / 2)
                and ds.labels.sum() == int(Fraction(n, 10) + Fraction(1, 2))):
            failures.append(i)
    dt = time.perf_counter() - t0
    ok = not failures and dt < 5.0
    criterion(2, "attack-model conformance", ok, f"({len(failures)} bad fixtures, {dt:.2f}s)")
    assert ok


def test_c03_combinatorics(criterion):
    t0 = time.perf_counter()
    ctx = [f"P{i:02d}" for i in range(35)]
    counts = [len(enumerate_concurrent(ctx, m)) for m in (1, 2, 3)]
    dt = time.perf_counter() - t0
    ok = counts == [35, 595, 6545] and dt < 1.0
    criterion(3, "combinatorics", ok, f"({counts}, {dt:.2f}s)")
    assert ok


def test_c04_vector_sizes(criterion):
    t0 = time.perf_counter()
    big = small_grid(36, 163)
    sizes = [
        vector_size(FeatureConfig("generators_only", 24, "target_only", "regression"), big),
        vector_size(FeatureConfig("generators_only", 24, "full_context", "regression"), big),
        vector_size(FeatureConfig("generators_only", 4, "full_context", "classification"), big),
    ]
    grid = small_grid()
    frame = SeriesFrame(0, grid.column_ids, np.random.default_rng(4).uniform(0, 90, (40, 8)))
    ds = inject_attacks(frame, "P1", grid, seed=0)
    widths_ok = True
    n_cfg = 0
    for c in ContextScope:
        for h in (0, 1, 4):
            for s in HistoryScope:
                for t in Task:
                    cfg = FeatureConfig(c, h, s, t)
                    widths_ok &= build_dataset(ds, cfg, grid).width == vector_size(cfg, grid)
                    n_cfg += 1
    dt = time.perf_counter() - t0
    ok = sizes == [59, 899, 180] and widths_ok and n_cfg == 24 and dt < 5.0
    criterion(4, "vector-size formulas", ok, f"({sizes}, {n_cfg} configs, {dt:.2f}s)")
    assert ok


def test_c05_gradient_check(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        hidden = [int(k) for k in rng.integers(2, 9, size=rng.integers(1, 4))]
        params = [(W, rng.normal(0.0, 0.5, size=b.shape)) for W, b in init_params(5, hidden, rng)]
        X = rng.normal(size=(9, 5))
        task = "classification" if seed % 2 else "regression"
        y = (rng.random(9) < 0.5).astype(float) if task == "classification" else rng.normal(size=9)
        _, grads = loss_and_grads(params, X, y, task)
        analytic, numeric = [], []
        h = 1e-6
        for li, (W, b) in enumerate(params):
            for arr, g in ((W, grads[li][0]), (b, grads[li][1])):
                for idx in np.ndindex(arr.shape):
                    old = arr[idx]
                    arr[idx] = old + h
                    lp, _ = loss_and_grads(params, X, y, task)
                    arr[idx] = old - h
                    lm, _ = loss_and_grads(params, X, y, task)
                    arr[idx] = old
                    analytic.append(g[idx])
                    numeric.append((lp - lm) / (2 * h))
        a, n = np.array(analytic), np.array(numeric)
        worst = max(worst, float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)))
    dt = time.perf_counter() - t0
    ok = worst < 1e-4 and dt < 30.0
    criterion(5, "MLP gradient check", ok, f"(max rel err {worst:.1e}, {dt:.1f}s)")
    assert ok


class _Identity:
    def predict(self, X):
        return X[:, 0]


def test_c06_threshold_oracle(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    bad = 0
    for i in range(50):
        n = int(rng.integers(20, 300))
        pred = rng.uniform(0, 100, n)
        lab = rng.random(n) < 0.1
        lab[rng.integers(n)] = True
        reported = np.clip(pred + rng.normal(0, 4, n) + lab * rng.normal(0, 40, n), 0, 100).round(1)
        model = det.TrainedModel("MLPR", _Identity(), {}, 1)
        d = det.fit_threshold(model, pred[:, None], reported, lab, 100.0)
        flags = d.detect(pred[:, None], reported)
        tp, fn, fp = int(np.sum(lab & flags)), int(np.sum(lab & ~flags)), int(np.sum(~lab & flags))
        best = best_f2_scan(np.abs(reported - pred), lab)
        bad += Fraction(5 * tp, 5 * tp + 4 * fn + fp) != best
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 10.0
    criterion(6, "threshold optimizer oracle", ok, f"({bad} of 50 below the scan, {dt:.2f}s)")
    assert ok


def test_c07_split_protocol(criterion):
    t0 = time.perf_counter()
    plan = make_split(174720, seed=0)
    folds_ok = all(
        np.array_equal(np.sort(np.concatenate(f)), rows)
        for f, rows in ((plan.folds, plan.fit), (plan.supervised_folds, plan.train)))
    disjoint = np.intersect1d(plan.test, plan.train).size == 0
    dt = time.perf_counter() - t0
    ok = plan.test.size == 34944 and folds_ok and disjoint and dt < 1.0
    criterion(7, "split protocol", ok, f"(test {plan.test.size}, {dt:.2f}s)")
    assert ok


# -- desk-scale reproduction -------------------------------------------------

DESK_GRIDS = {
    "MLPR": {"hidden_layers": [2], "width": [64]},
    "MLPC": {"hidden_layers": [2], "width": [64]},
    "KNNC": {"k": [1, 5]},
    "NBC": {},
}
DESK_CFG = FeatureConfig("generators_only", 24, "target_only", "classification")


@pytest.fixture(scope="module")
def desk():
    t0 = time.perf_counter()
    grid, params = datagen.synthetic_grid(seed=1)
    frame = datagen.generate(grid, 2, params, datagen.DispatchParams(seed=1))
    ds = inject_attacks(frame, "H01", grid, seed=1)
    split = make_split(frame.n_steps, seed=0)
    runs = {a: run_plant(ds, grid, DESK_CFG, a, det.HyperGrid(a, g), split, seed=0)
            for a, g in DESK_GRIDS.items()}
    return {"grid": grid, "dataset": ds, "split": split, "runs": runs,
            "seconds": time.perf_counter() - t0}


def test_c08_desk_reproduction(criterion, desk):
    r = {a: run.result for a, run in desk["runs"].items()}
    n_plants = desk["grid"].n_plants
    r2_ok = r["MLPR"].r2 >= 0.8
    order_ok = r["MLPC"].f2 > r["KNNC"].f2 and r["MLPC"].f2 > r["NBC"].f2
    resid_ok = abs(r["MLPR"].f2 - r["MLPC"].f2) <= 0.1
    ok = n_plants == 12 and r2_ok and order_ok and resid_ok and desk["seconds"] < 1800
    criterion(8, "desk-scale reproduction", ok,
              f"(R2 {r['MLPR'].r2:.3f}; F2 MLPC {r['MLPC'].f2:.3f} KNNC {r['KNNC'].f2:.3f} "
              f"NBC {r['NBC'].f2:.3f} residual {r['MLPR'].f2:.3f}; {desk['seconds']:.0f}s)")
    assert ok


def test_c09_history_effect(criterion, desk):
    t0 = time.perf_counter()
    errs = {}
    for h in (0, 1):
        cfg = FeatureConfig("generators_only", h, "target_only", "regression")
        run = run_plant(desk["dataset"], desk["grid"], cfg, "MLPR",
                        det.HyperGrid("MLPR", DESK_GRIDS["MLPR"]), desk["split"], seed=0)
        errs[h] = run.result.relative_error
    dt = time.perf_counter() - t0
    ok = errs[1] <= 0.8 * errs[0] and dt < 1200
    criterion(9, "history effect", ok,
              f"(relative error H=0 {errs[0]:.3f}, H=1 {errs[1]:.3f}, {dt:.0f}s)")
    assert ok


def test_c10_robustness_sanity(criterion, desk):
    t0 = time.perf_counter()
    ds, grid, split = desk["dataset"], desk["grid"], desk["split"]
    run = desk["runs"]["MLPC"]
    context = [p for p in grid.plant_ids if p != ds.target]
    zero = robustness_scan(run.detector, ds, grid, DESK_CFG, split.test, context, m_max=0)
    one = robustness_scan(run.detector, ds, grid, DESK_CFG, split.test, context, m_max=1)
    base = one["baseline"]["f2"]
    med = one["per_m"]["1"]["f2"]["median"]
    dt = time.perf_counter() - t0
    ok = (zero["baseline"] == run.result.to_dict() and zero["combinations"] == []
          and len(context) == 11 and one["per_m"]["1"]["n_combinations"] == 11
          and abs(med - base) <= 0.05 and dt < 900)
    criterion(10, "robustness scan sanity", ok,
              f"(baseline F2 {base:.3f}, m=1 median {med:.3f}, {dt:.1f}s)")
    assert ok


def test_c11_end_to_end_determinism(criterion, tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "grid": {"synthetic": {"n_hydro": 3, "n_gas": 1, "n_coal": 0, "n_nuclear": 0,
                               "n_loads": 5, "seed": 3}},
        "data": {"generate": {"years": 1}},
        "targets": ["H01", "G01"],
        "features": [{"context_scope": "generators_only", "history_len": 2,
                      "history_scope": "target_only"}],
        "algos": {"NBC": None, "KNNC": {"k": [1, 5]}, "MLPC": {"hidden_layers": [1], "width": [16]},
                  "MLPR": {"hidden_layers": [1], "width": [16]}},
        "robustness": {"algos": ["MLPR", "KNNC"], "m_max": 2},
        "seed": 4,
    }))
    docs = []
    codes = []
    for name in ("a", "b"):
        out = tmp_path / name
        codes.append(main(["all", "--config", str(cfg), "--out", str(out)]))
        docs.append({f: strip_timing(json.loads((out / "reports" / f).read_text()))
                     for f in ("eval.json", "robustness.json")})
        docs[-1]["tables"] = {p.name: p.read_text() for p in sorted((out / "tables").iterdir())}
    dt = time.perf_counter() - t0
    ok = codes == [0, 0] and docs[0] == docs[1] and dt < 1800
    criterion(11, "end-to-end determinism", ok, f"(exit codes {codes}, {dt:.1f}s)")
    assert ok
