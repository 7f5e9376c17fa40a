"""Grids, plants and hourly injection series.

Loads are stored as positive consumption (MW); generation as positive
production (MW).  Only active power is modelled.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HOURS_PER_YEAR = 8736  # 364 days = 52 whole weeks


class FrameStructureError(ValueError):
    """Frame columns do not line up with the grid they are checked against."""


class PlantKind(str, enum.Enum):
    HYDRO = "hydro"
    GAS = "gas"
    COAL = "coal"
    NUCLEAR = "nuclear"


@dataclass(frozen=True)
class Plant:
    id: str
    kind: PlantKind
    rated_power: float
    annual_energy: float
    bus_id: str

    def __post_init__(self):
        object.__setattr__(self, "kind", PlantKind(self.kind))
        object.__setattr__(self, "rated_power", float(self.rated_power))
        object.__setattr__(self, "annual_energy", float(self.annual_energy))
        if not self.id:
            raise ValueError("plant id must be non-empty")
        if not np.isfinite(self.rated_power) or self.rated_power <= 0:
            raise ValueError(f"plant {self.id}: rated_power must be > 0, got {self.rated_power}")
        if not np.isfinite(self.annual_energy) or self.annual_energy < 0:
            raise ValueError(f"plant {self.id}: annual_energy must be >= 0")
        if self.annual_energy > self.rated_power * HOURS_PER_YEAR:
            raise ValueError(
                f"plant {self.id}: annual_energy {self.annual_energy} exceeds "
                f"rated_power x {HOURS_PER_YEAR} h"
            )

    @property
    def capacity_factor(self) -> float:
        return self.annual_energy / (self.rated_power * HOURS_PER_YEAR)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "rated_power": self.rated_power,
            "annual_energy": self.annual_energy,
            "bus_id": self.bus_id,
        }


@dataclass(frozen=True)
class GridSpec:
    name: str
    load_bus_ids: tuple[str, ...]
    plants: tuple[Plant, ...]
    hours_per_year: int = HOURS_PER_YEAR

    def __post_init__(self):
        object.__setattr__(self, "load_bus_ids", tuple(self.load_bus_ids))
        object.__setattr__(self, "plants", tuple(self.plants))
        if self.hours_per_year != HOURS_PER_YEAR:
            raise ValueError(f"hours_per_year is fixed at {HOURS_PER_YEAR}")
        if len(self.load_bus_ids) < 1:
            raise ValueError("a grid needs at least one load bus")
        if len(self.plants) < 2:
            raise ValueError("a grid needs at least two plants (target + context)")
        ids = list(self.load_bus_ids) + [p.id for p in self.plants]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate ids in grid {self.name}: {dup}")

    @property
    def n_plants(self) -> int:
        return len(self.plants)

    @property
    def n_loads(self) -> int:
        return len(self.load_bus_ids)

    @property
    def plant_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.plants)

    @property
    def column_ids(self) -> tuple[str, ...]:
        """Canonical frame column order: loads, then plants."""
        return self.load_bus_ids + self.plant_ids

    def plant(self, plant_id: str) -> Plant:
        for p in self.plants:
            if p.id == plant_id:
                return p
        raise KeyError(f"no plant {plant_id!r} in grid {self.name}")

    def rated(self, plant_id: str) -> float:
        return self.plant(plant_id).rated_power

    def attackable_plants(self, include_nuclear: bool = False) -> tuple[str, ...]:
        return tuple(
            p.id for p in self.plants if include_nuclear or p.kind is not PlantKind.NUCLEAR
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "load_bus_ids": list(self.load_bus_ids),
            "plants": [p.to_dict() for p in self.plants],
            "hours_per_year": self.hours_per_year,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GridSpec":
        return cls(
            name=doc["name"],
            load_bus_ids=tuple(doc["load_bus_ids"]),
            plants=tuple(Plant(**p) for p in doc["plants"]),
            hours_per_year=doc.get("hours_per_year", HOURS_PER_YEAR),
        )


@dataclass(frozen=True, eq=False)
class SeriesFrame:
    """T x C matrix of MW values with named columns.

    ``values`` is copied on construction and made read-only.
    """

    start_index: int
    columns: tuple[str, ...]
    values: np.ndarray
    year_length: int = HOURS_PER_YEAR
    _pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cols = tuple(self.columns)
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.ndim != 2:
            raise ValueError("frame values must be a 2-D matrix")
        if vals.shape[1] != len(cols):
            raise ValueError(f"{vals.shape[1]} value columns but {len(cols)} column ids")
        if vals.shape[0] < 1:
            raise ValueError("frame must have at least one time step")
        if len(set(cols)) != len(cols):
            raise ValueError("duplicate column ids in frame")
        vals.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "start_index", int(self.start_index))
        object.__setattr__(self, "_pos", {c: i for i, c in enumerate(cols)})

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def hours(self) -> np.ndarray:
        return np.arange(self.start_index, self.start_index + self.n_steps)

    def index_of(self, column: str) -> int:
        try:
            return self._pos[column]
        except KeyError:
            raise KeyError(f"no column {column!r} in frame") from None

    def column(self, column: str) -> np.ndarray:
        return self.values[:, self.index_of(column)]

    def select(self, columns: Sequence[str]) -> np.ndarray:
        return self.values[:, [self.index_of(c) for c in columns]]

    def with_column(self, column: str, new_values: np.ndarray) -> "SeriesFrame":
        vals = np.array(self.values)
        vals[:, self.index_of(column)] = new_values
        return SeriesFrame(self.start_index, self.columns, vals, self.year_length)

    def equals(self, other: "SeriesFrame") -> bool:
        return (
            self.start_index == other.start_index
            and self.columns == other.columns
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    @staticmethod
    def concat_columns(left: "SeriesFrame", right: "SeriesFrame") -> "SeriesFrame":
        if left.n_steps != right.n_steps or left.start_index != right.start_index:
            raise ValueError("frames cover different time ranges")
        return SeriesFrame(
            left.start_index,
            left.columns + right.columns,
            np.hstack([left.values, right.values]),
        )


@dataclass(frozen=True)
class Violation:
    column: str
    timestep: int
    kind: str
    value: float


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)


def _check_structure(frame: SeriesFrame, grid: GridSpec) -> None:
    known = set(grid.column_ids)
    unknown = [c for c in frame.columns if c not in known]
    if unknown:
        raise FrameStructureError(f"frame columns not in grid {grid.name}: {unknown}")
    # Any subset is allowed, but it has to follow the grid's canonical order.
    order = [grid.column_ids.index(c) for c in frame.columns]
    if order != sorted(order):
        raise FrameStructureError("frame column order does not follow the grid (loads, then plants)")


def validate_frame(frame: SeriesFrame, grid: GridSpec) -> ValidationReport:
    """Check every cell of ``frame`` against the grid's physical bounds.

    Raises :class:`FrameStructureError` before scanning any value if the
    column ids do not resolve against ``grid``.
    """
    _check_structure(frame, grid)
    report = ValidationReport()
    vals = frame.values
    rated = {p.id: p.rated_power for p in grid.plants}
    for j, col in enumerate(frame.columns):
        x = vals[:, j]
        bad = ~np.isfinite(x)
        for t in np.flatnonzero(bad):
            report.violations.append(Violation(col, frame.start_index + int(t), "non_finite", float(x[t])))
        ok = ~bad
        if col in rated:
            low = ok & (x < 0)
            high = ok & (x > rated[col])
            for t in np.flatnonzero(low):
                report.violations.append(Violation(col, frame.start_index + int(t), "below_zero", float(x[t])))
            for t in np.flatnonzero(high):
                report.violations.append(Violation(col, frame.start_index + int(t), "above_rated", float(x[t])))
        else:
            neg = ok & (x < 0)
            for t in np.flatnonzero(neg):
                report.violations.append(Violation(col, frame.start_index + int(t), "negative_load", float(x[t])))
    report.violations.sort(key=lambda v: (v.timestep, frame.index_of(v.column)))
    return report


def require_valid(frame: SeriesFrame, grid: GridSpec) -> None:
    report = validate_frame(frame, grid)
    if not report.ok:
        first = report.violations[0]
        raise ValueError(
            f"{len(report)} invalid cells; first: {first.kind} at "
            f"({first.column}, t={first.timestep}) value={first.value}"
        )


def grid_frame(grid: GridSpec, loads: SeriesFrame, generation: SeriesFrame) -> SeriesFrame:
    """Assemble a full frame (loads then plants) in the grid's column order."""
    both = SeriesFrame.concat_columns(loads, generation)
    vals = both.select(grid.column_ids)
    return SeriesFrame(both.start_index, grid.column_ids, vals)


def make_grid(name: str, loads: Iterable[str], plants: Iterable[Plant]) -> GridSpec:
    return GridSpec(name=name, load_bus_ids=tuple(loads), plants=tuple(plants))
