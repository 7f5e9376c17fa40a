"""Metrics, splits, model search, the test protocol and robustness scans."""

from gridwatch.evaluation.metrics import (
    UNDEFINED,
    ConfusionCounts,
    f2_score,
    prf_metrics,
    r2_score,
    rmse,
    summarize,
)
from gridwatch.evaluation.protocol import (
    DEFAULT_BAND_MW,
    EvalResult,
    PlantRun,
    evaluate_detector,
    positions,
    run_plant,
    task_config,
    evaluate_plant,
    train_plant,
)
from gridwatch.evaluation.robustness import CombinationBudgetError, robustness_scan
from gridwatch.evaluation.search import SearchError, SearchResult, grid_search_cv
from gridwatch.evaluation.splits import SplitPlan, make_split

__all__ = [
    "UNDEFINED", "ConfusionCounts", "f2_score", "prf_metrics", "r2_score", "rmse", "summarize",
    "DEFAULT_BAND_MW", "EvalResult", "PlantRun", "evaluate_detector", "positions", "run_plant", "task_config", "evaluate_plant", "train_plant",
    "CombinationBudgetError", "robustness_scan", "SearchError", "SearchResult", "grid_search_cv",
    "SplitPlan", "make_split",
]
