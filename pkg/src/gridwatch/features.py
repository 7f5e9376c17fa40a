"""Design matrices along the context / history / historical-context axes.

Column layout of a row at time t (ids in lexicographic order within a block):

1. target reported value at t                 (classification only)
2. target history t-1 .. t-H
3. context plants at t                        (all plants except the target)
4. context plant history, lag-major: lag 1 ids..., lag 2 ids...  (full_context)
5. loads at t                                 (all_injections)
6. load history, lag-major                    (all_injections + full_context)

History indices wrap modulo the series length (the series are whole
52-week years, so the wrap lands on the same hour of the same weekday).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from gridwatch.attacks import LabeledDataset
from gridwatch.grid_model import GridSpec, SeriesFrame


class ContextScope(str, enum.Enum):
    GENERATORS_ONLY = "generators_only"
    ALL_INJECTIONS = "all_injections"


class HistoryScope(str, enum.Enum):
    TARGET_ONLY = "target_only"
    FULL_CONTEXT = "full_context"


class Task(str, enum.Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


@dataclass(frozen=True)
class FeatureConfig:
    context_scope: ContextScope
    history_len: int
    history_scope: HistoryScope
    task: Task

    def __post_init__(self):
        object.__setattr__(self, "context_scope", ContextScope(self.context_scope))
        object.__setattr__(self, "history_scope", HistoryScope(self.history_scope))
        object.__setattr__(self, "task", Task(self.task))
        if int(self.history_len) != self.history_len or self.history_len < 0:
            raise ValueError("history_len must be a non-negative integer")
        object.__setattr__(self, "history_len", int(self.history_len))

    @property
    def key(self) -> str:
        ctx = "gen" if self.context_scope is ContextScope.GENERATORS_ONLY else "all"
        hs = "tgt" if self.history_scope is HistoryScope.TARGET_ONLY else "ctx"
        task = "clf" if self.task is Task.CLASSIFICATION else "reg"
        return f"{ctx}-H{self.history_len}-{hs}-{task}"

    def with_task(self, task: Task | str) -> "FeatureConfig":
        return replace(self, task=Task(task))

    def to_dict(self) -> dict:
        return {
            "context_scope": self.context_scope.value,
            "history_len": self.history_len,
            "history_scope": self.history_scope.value,
            "task": self.task.value,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureConfig":
        missing = {"context_scope", "history_len", "history_scope", "task"} - set(doc)
        if missing:
            raise ValueError(f"FeatureConfig fields missing: {sorted(missing)}")
        return cls(doc["context_scope"], doc["history_len"], doc["history_scope"], doc["task"])


def vector_size(config: FeatureConfig, grid: GridSpec) -> int:
    n, n_loads, h = grid.n_plants, grid.n_loads, config.history_len
    full = config.history_scope is HistoryScope.FULL_CONTEXT
    size = h + (n - 1)  # target history + context at t
    if config.task is Task.CLASSIFICATION:
        size += 1
    if full:
        size += h * (n - 1)
    if config.context_scope is ContextScope.ALL_INJECTIONS:
        size += n_loads * (h + 1 if full else 1)
    return size


def _layout(config: FeatureConfig, grid: GridSpec, target: str):
    """List of (column id, lag) pairs in feature order."""
    if target not in grid.plant_ids:
        raise KeyError(f"target {target!r} is not a plant")
    h = config.history_len
    full = config.history_scope is HistoryScope.FULL_CONTEXT
    context = sorted(p for p in grid.plant_ids if p != target)
    loads = sorted(grid.load_bus_ids)
    out = []
    if config.task is Task.CLASSIFICATION:
        out.append((target, 0))
    out += [(target, lag) for lag in range(1, h + 1)]
    out += [(c, 0) for c in context]
    if full:
        out += [(c, lag) for lag in range(1, h + 1) for c in context]
    if config.context_scope is ContextScope.ALL_INJECTIONS:
        out += [(c, 0) for c in loads]
        if full:
            out += [(c, lag) for lag in range(1, h + 1) for c in loads]
    return out


def feature_names(config: FeatureConfig, grid: GridSpec, target: str) -> list[str]:
    return [f"{c}@t" if lag == 0 else f"{c}@t-{lag}" for c, lag in _layout(config, grid, target)]


@dataclass(frozen=True)
class Scaling:
    mean: np.ndarray
    scale: np.ndarray  # 0 marks a zero-variance feature

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Scaling":
        return cls(np.asarray(doc["mean"], dtype=np.float64), np.asarray(doc["scale"], dtype=np.float64))

    @staticmethod
    def fit(X: np.ndarray) -> "Scaling":
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        # tiny relative spread is numerical noise on a constant column
        scale[scale <= 1e-12 * np.maximum(np.abs(mean), 1.0)] = 0.0
        return Scaling(mean, scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.shape[0]:
            raise ValueError(f"width mismatch: {X.shape[-1]} features, scaling has {self.mean.shape[0]}")
        safe = np.where(self.scale > 0, self.scale, 1.0)
        return np.where(self.scale > 0, (X - self.mean) / safe, 0.0)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray                 # labels (classification) or truth MW (regression)
    labels: np.ndarray            # anomaly ground truth per row
    reported: np.ndarray          # target's reported MW at t
    truth: np.ndarray             # target's true MW at t
    rows: np.ndarray              # time index (0-based step) per row
    feature_names: tuple[str, ...]
    config: FeatureConfig
    target: str
    scaling: Scaling | None = field(default=None)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def take(self, idx: np.ndarray) -> "DesignMatrix":
        """Row subset by position (not by time index)."""
        idx = np.asarray(idx)
        return replace(
            self,
            X=self.X[idx], y=self.y[idx], labels=self.labels[idx],
            reported=self.reported[idx], truth=self.truth[idx], rows=self.rows[idx],
        )


def build_dataset(
    dataset: LabeledDataset,
    config: FeatureConfig,
    grid: GridSpec,
    rows: np.ndarray | None = None,
    wrap: bool = True,
    history_from: str = "truth",
) -> DesignMatrix:
    """Feature matrix for the dataset's target plant.

    ``rows`` selects time steps (default: all usable ones).  With ``wrap``
    off, the first H steps are dropped instead of wrapping.
    ``history_from`` picks the frame lagged values are read from: "truth"
    models each attack as a single-step event after regular operation,
    "reported" uses the attacked series as an operator would log it.
    """
    if history_from not in ("truth", "reported"):
        raise ValueError("history_from must be 'truth' or 'reported'")
    reported: SeriesFrame = dataset.reported
    hist_frame = dataset.truth if history_from == "truth" else reported
    n = reported.n_steps
    h = config.history_len
    if rows is None:
        rows = np.arange(n) if wrap else np.arange(h, n)
        if not wrap and h >= n:
            raise ValueError(f"history length {h} >= series length {n}")
    else:
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= n):
            raise ValueError("row index out of range")
        if not wrap and rows.size and rows.min() < h:
            raise ValueError(f"rows before step {h} need wrapping")
    layout = _layout(config, grid, dataset.target)
    X = np.empty((rows.size, len(layout)))
    cache = {}
    for k, (col, lag) in enumerate(layout):
        src = reported if lag == 0 else hist_frame
        key = (id(src), col)
        if key not in cache:
            cache[key] = src.column(col)
        series = cache[key]
        X[:, k] = series[(rows - lag) % n]
    j = reported.index_of(dataset.target)
    truth = dataset.truth.values[rows, j]
    labels = dataset.labels[rows]
    y = labels.astype(np.float64) if config.task is Task.CLASSIFICATION else truth.copy()
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature values")
    return DesignMatrix(
        X=X, y=y, labels=labels, reported=reported.values[rows, j].copy(), truth=truth,
        rows=rows.copy(), feature_names=tuple(feature_names(config, grid, dataset.target)),
        config=config, target=dataset.target,
    )


def standardize(matrix: DesignMatrix, stats: Scaling | None = None) -> DesignMatrix:
    """Zero-mean, unit-variance features; ``stats`` reuses training statistics."""
    if stats is None:
        stats = Scaling.fit(matrix.X)
    return replace(matrix, X=stats.transform(matrix.X), scaling=stats)
