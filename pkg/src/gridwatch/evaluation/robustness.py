"""Concurrent-attack robustness scan of an already trained detector."""

from __future__ import annotations

import math
from functools import partial

import numpy as np

from gridwatch.attacks import SAME_STEPS, LabeledDataset, apply_concurrent, enumerate_concurrent
from gridwatch.evaluation.metrics import summarize
from gridwatch.evaluation.protocol import DEFAULT_BAND_MW, evaluate_detector
from gridwatch.features import FeatureConfig, build_dataset
from gridwatch.grid_model import GridSpec
from gridwatch.parallel import pmap

EXHAUSTIVE = "exhaustive"
WORST_CASE = "worst_case_greedy"
MODES = (EXHAUSTIVE, WORST_CASE)
DEFAULT_MAX_COMBINATIONS = 20000


class CombinationBudgetError(ValueError):
    pass


def _score_combo(combo, detector, dataset, grid, config, rows, policy, seed, band_mw, rated):
    corrupted = apply_concurrent(dataset, combo, grid, policy, seed, rows=rows)
    matrix = build_dataset(corrupted, config, grid, rows=rows)
    res = evaluate_detector(detector, matrix, rated, seed, band_mw)
    return {
        "m": len(combo),
        "combination": list(combo),
        "f2": res.f2,
        "precision": res.precision,
        "recall": res.recall,
        "error_rate": res.error_rate,
    }


def _clean(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def robustness_scan(detector, dataset: LabeledDataset, grid: GridSpec, config: FeatureConfig,
                    test_rows, context_plants, m_max: int = 3, policy: str = SAME_STEPS,
                    mode: str = EXHAUSTIVE, seed: int = 0, band_mw: float = DEFAULT_BAND_MW,
                    max_combinations: int = DEFAULT_MAX_COMBINATIONS, workers: int = 1) -> dict:
    """F2 distribution over sets of m concurrently attacked context plants.

    Concurrent corruption is confined to ``test_rows``.  Exhaustive mode
    scores every combination for m = 1..m_max; worst-case mode grows one
    combination greedily, adding at each m the plant that lowers F2 most.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    context = sorted(context_plants)
    if dataset.target in context:
        raise ValueError("context plants include the target")
    rows = np.sort(np.asarray(test_rows, dtype=np.int64))
    rated = grid.rated(dataset.target)
    m_max = min(m_max, len(context))
    score = partial(_score_combo, detector=detector, dataset=dataset, grid=grid, config=config,
                    rows=rows, policy=policy, seed=seed, band_mw=band_mw, rated=rated)

    baseline = evaluate_detector(detector, build_dataset(dataset, config, grid, rows=rows),
                                 rated, seed, band_mw)
    report = {
        "target": dataset.target,
        "config_key": config.key,
        "algo": baseline.algo,
        "mode": mode,
        "policy": policy,
        "seed": seed,
        "band_mw": band_mw,
        "n_context": len(context),
        "baseline": baseline.to_dict(),
        "per_m": {},
        "combinations": [],
    }

    if mode == EXHAUSTIVE:
        combos = [c for m in range(1, m_max + 1) for c in enumerate_concurrent(context, m)]
        if len(combos) > max_combinations:
            raise CombinationBudgetError(
                f"{len(combos)} combinations exceed the budget of {max_combinations}")
        scored = pmap(score, combos, workers)
    else:
        scored, chosen = [], []
        for _ in range(m_max):
            candidates = [tuple(sorted(chosen + [p])) for p in context if p not in chosen]
            level = pmap(score, candidates, workers)
            scored += level
            # lowest F2; undefined scores and ties resolved by combination order
            worst = min(level, key=lambda r: (r["f2"] if math.isfinite(r["f2"]) else math.inf,
                                              r["combination"]))
            chosen = list(worst["combination"])
            report.setdefault("worst_case", {})[str(len(chosen))] = {
                "combination": worst["combination"], "f2": _clean(worst["f2"])}

    scored.sort(key=lambda r: (r["m"], r["combination"]))
    for m in range(1, m_max + 1):
        level = [r for r in scored if r["m"] == m]
        rates = [r["error_rate"] for r in level if r["error_rate"] is not None]
        report["per_m"][str(m)] = {
            "n_combinations": len(level),
            "f2": summarize([r["f2"] for r in level]),
            "error_rate": summarize(rates) if rates else None,
        }
    report["combinations"] = [{k: _clean(v) for k, v in r.items()} for r in scored]
    return report
