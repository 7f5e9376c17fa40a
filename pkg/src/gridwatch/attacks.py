"""On/off false-data injection and concurring-attack scenarios."""

from __future__ import annotations

import itertools
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gridwatch.grid_model import GridSpec, SeriesFrame

SAME_STEPS = "same_steps"
INDEPENDENT = "independent"
POLICIES = (SAME_STEPS, INDEPENDENT)


def onoff_value(p: float, rated: float) -> float:
    """Reported value that maximises |reported - p| within [0, rated].

    Exactly half of rated reports 0.
    """
    if not rated > 0:
        raise ValueError("rated power must be > 0")
    if not 0 <= p <= rated:
        raise ValueError(f"actual output {p} outside [0, {rated}]")
    return float(rated) if p < rated / 2 else 0.0


def onoff_values(p: np.ndarray, rated: float) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any((p < 0) | (p > rated)) or not np.all(np.isfinite(p)):
        raise ValueError(f"actual outputs must lie in [0, {rated}]")
    return np.where(p < rated / 2, float(rated), 0.0)


def n_attacked(n_steps: int, fraction: float) -> int:
    # round half up; the product is nudged so 0.1 * 20 etc. land exactly
    return int(np.floor(fraction * n_steps + 0.5 + 1e-9))


@dataclass(frozen=True)
class AttackScenario:
    target_plant: str
    attacked_steps: tuple[int, ...]
    n_steps: int
    fraction: float
    seed: int
    concurrent_plants: tuple[str, ...] = ()
    concurrent_steps: dict = field(default_factory=dict)
    policy: str | None = None

    def __post_init__(self):
        if self.target_plant in self.concurrent_plants:
            raise ValueError("target plant cannot also be a concurrent plant")
        steps = tuple(int(s) for s in self.attacked_steps)
        if list(steps) != sorted(set(steps)):
            raise ValueError("attacked_steps must be sorted and unique")
        if steps and not 0 <= steps[0] <= steps[-1] < self.n_steps:
            raise ValueError("attacked step out of range")
        object.__setattr__(self, "attacked_steps", steps)
        conc = {k: tuple(int(s) for s in v) for k, v in dict(self.concurrent_steps).items()}
        object.__setattr__(self, "concurrent_steps", conc)

    def to_dict(self) -> dict:
        return {
            "target_plant": self.target_plant,
            "attacked_steps": list(self.attacked_steps),
            "n_steps": self.n_steps,
            "fraction": self.fraction,
            "seed": self.seed,
            "concurrent_plants": list(self.concurrent_plants),
            "concurrent_steps": {k: list(v) for k, v in sorted(self.concurrent_steps.items())},
            "policy": self.policy,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AttackScenario":
        return cls(
            target_plant=doc["target_plant"],
            attacked_steps=tuple(doc["attacked_steps"]),
            n_steps=int(doc["n_steps"]),
            fraction=float(doc["fraction"]),
            seed=int(doc["seed"]),
            concurrent_plants=tuple(doc.get("concurrent_plants", ())),
            concurrent_steps=doc.get("concurrent_steps", {}),
            policy=doc.get("policy"),
        )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    truth: SeriesFrame
    reported: SeriesFrame
    target: str
    labels: np.ndarray
    scenario: AttackScenario

    def __post_init__(self):
        lab = np.array(self.labels, dtype=bool)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        if lab.shape != (self.truth.n_steps,):
            raise ValueError("one label per time step required")

    @property
    def attacked_steps(self) -> np.ndarray:
        return np.flatnonzero(self.labels)


def inject_attacks(
    frame: SeriesFrame,
    target: str,
    grid: GridSpec,
    fraction: float = 0.10,
    seed: int = 0,
) -> LabeledDataset:
    """Replace ``round(fraction * T)`` random steps of ``target`` by their
    on/off value and label exactly those steps."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    if target not in grid.plant_ids:
        raise KeyError(f"target {target!r} is not a plant of grid {grid.name}")
    j = frame.index_of(target)
    n = frame.n_steps
    k = n_attacked(n, fraction)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF,
                                                         zlib.crc32(target.encode())]))
    steps = np.sort(rng.choice(n, size=k, replace=False))
    rated = grid.rated(target)
    col = frame.values[:, j].copy()
    col[steps] = onoff_values(col[steps], rated)
    labels = np.zeros(n, dtype=bool)
    labels[steps] = True
    scenario = AttackScenario(target, tuple(steps.tolist()), n, fraction, seed)
    return LabeledDataset(frame, frame.with_column(target, col), target, labels, scenario)


def enumerate_concurrent(context_plants: Sequence[str], m: int) -> list[tuple[str, ...]]:
    """All size-``m`` subsets of the context plants, lexicographic order."""
    plants = sorted(context_plants)
    if len(set(plants)) != len(plants):
        raise ValueError("context plants must be distinct")
    if not 1 <= m <= len(plants):
        raise ValueError(f"m must be in [1, {len(plants)}], got {m}")
    return list(itertools.combinations(plants, m))


def combo_seed(seed: int, combo: Sequence[str]) -> np.random.SeedSequence:
    key = zlib.crc32("|".join(sorted(combo)).encode())
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, key])


def concurrent_steps(dataset: LabeledDataset, combo: Sequence[str], policy: str,
                     seed: int, rows: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Steps at which each combo plant is corrupted.

    ``same_steps``: the target's attacked steps plus an equal number of the
    target's regular steps (one draw shared by all combo plants), so both
    classes see a corrupted context.  ``independent``: a fresh draw of the
    attack fraction per plant.  ``rows`` restricts the draw to a subset of
    time steps (e.g. a test split).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    rng = np.random.default_rng(combo_seed(seed, combo))
    universe = np.arange(dataset.truth.n_steps) if rows is None else np.sort(np.asarray(rows))
    out = {}
    if policy == SAME_STEPS:
        attacked = universe[dataset.labels[universe]]
        regular = universe[~dataset.labels[universe]]
        k = min(attacked.size, regular.size)
        matched = rng.choice(regular, size=k, replace=False) if k else regular[:0]
        steps = np.union1d(attacked, matched)
        for pid in combo:
            out[pid] = steps
    else:
        k = n_attacked(universe.size, dataset.scenario.fraction)
        for pid in combo:
            out[pid] = np.sort(rng.choice(universe, size=k, replace=False))
    return out


def apply_concurrent(
    dataset: LabeledDataset,
    combo: Sequence[str],
    grid: GridSpec,
    policy: str = SAME_STEPS,
    seed: int = 0,
    rows: np.ndarray | None = None,
) -> LabeledDataset:
    """On/off-corrupt the combo plants; the target's labels are untouched."""
    combo = tuple(sorted(combo))
    if dataset.target in combo:
        raise ValueError(f"combo contains the target {dataset.target!r}")
    for pid in combo:
        if pid not in grid.plant_ids:
            raise KeyError(f"unknown plant {pid!r}")
    if not combo:
        return dataset
    steps = concurrent_steps(dataset, combo, policy, seed, rows)
    vals = np.array(dataset.reported.values)
    for pid in combo:
        j = dataset.reported.index_of(pid)
        s = steps[pid]
        vals[s, j] = onoff_values(dataset.truth.values[s, j], grid.rated(pid))
    reported = SeriesFrame(dataset.reported.start_index, dataset.reported.columns, vals)
    sc = dataset.scenario
    scenario = AttackScenario(
        sc.target_plant, sc.attacked_steps, sc.n_steps, sc.fraction, sc.seed,
        concurrent_plants=combo,
        concurrent_steps={pid: tuple(steps[pid].tolist()) for pid in combo},
        policy=policy,
    )
    return LabeledDataset(dataset.truth, reported, dataset.target, dataset.labels, scenario)


def rebuild_dataset(frame: SeriesFrame, scenario: AttackScenario, grid: GridSpec) -> LabeledDataset:
    """Labeled dataset from the truth frame and a stored scenario."""
    if scenario.n_steps != frame.n_steps:
        raise ValueError("scenario and frame lengths differ")
    steps = np.asarray(scenario.attacked_steps, dtype=np.int64)
    col = frame.column(scenario.target_plant).copy()
    col[steps] = onoff_values(col[steps], grid.rated(scenario.target_plant))
    labels = np.zeros(frame.n_steps, dtype=bool)
    labels[steps] = True
    return LabeledDataset(frame, frame.with_column(scenario.target_plant, col),
                          scenario.target_plant, labels, scenario)
