"""Desk-scale synthetic load and generation series.

Loads are a sum of daily / weekly / seasonal sinusoids plus bounded AR(1)
noise.  Generation comes from a simplified dispatch: nuclear runs flat,
every other plant takes a share of the residual demand proportional to its
remaining annual-energy budget, perturbed by a log-normal factor and clipped
to rated power.  Overflow from clipped plants is re-distributed by merit
order.  The perturbation mixes a plant-specific random projection of the
standardized load pattern (``load_coupling``) with a plant-specific AR(1)
term (``smoothing_hours``), so a plant's output is partly explained by the
rest of the grid at the same hour and partly only by its own recent past.
"""

from __future__ import annotations

import logging
import math
import warnings
import zlib
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from gridwatch import kernels
from gridwatch.grid_model import (
    HOURS_PER_YEAR,
    GridSpec,
    Plant,
    PlantKind,
    SeriesFrame,
    grid_frame,
)

log = logging.getLogger(__name__)

DEFAULT_MERIT_ORDER = {
    PlantKind.NUCLEAR: 0,
    PlantKind.HYDRO: 1,
    PlantKind.COAL: 2,
    PlantKind.GAS: 3,
}

# Relative size of the multiplicative dispatch perturbation per plant kind.
KIND_VOLATILITY = {
    PlantKind.HYDRO: 0.5,
    PlantKind.GAS: 0.35,
    PlantKind.COAL: 0.15,
    PlantKind.NUCLEAR: 0.0,
}

ANNUAL_ENERGY_TOLERANCE = 0.05
_NOISE_PHI = 0.9
_EXPORT_PHI = math.exp(-1.0 / 24.0)


class DispatchInfeasible(RuntimeError):
    def __init__(self, hour: int, demand: float, capacity: float):
        self.hour = hour
        super().__init__(
            f"demand {demand:.1f} MW at hour {hour} exceeds fleet capacity {capacity:.1f} MW"
        )


def column_seed(seed: int, column_id: str) -> np.random.SeedSequence:
    """Seed for one column, independent of generation order."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(column_id.encode())])


@dataclass(frozen=True)
class LoadProfileParams:
    base_mw: float
    daily_amp: float = 0.2
    weekly_amp: float = 0.08
    seasonal_amp: float = 0.15
    noise_sigma: float = 0.03
    seed: int = 0

    def __post_init__(self):
        if not self.base_mw > 0:
            raise ValueError("base_mw must be > 0")
        for name in ("daily_amp", "weekly_amp", "seasonal_amp"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ValueError(f"{name} must be in [0, 1), got {v}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        total = self.daily_amp + self.weekly_amp + self.seasonal_amp + 3 * self.noise_sigma
        if total >= 1:
            raise ValueError(
                f"amplitudes + 3*noise_sigma = {total:.3f} >= 1 would allow non-positive loads"
            )


@dataclass(frozen=True)
class DispatchParams:
    export_fraction: float = 0.05
    export_sigma: float = 0.03
    merit_order: Mapping[PlantKind, int] = field(default_factory=lambda: dict(DEFAULT_MERIT_ORDER))
    smoothing_hours: int = 12
    load_coupling: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.load_coupling <= 1:
            raise ValueError("load_coupling must be in [0, 1]")
        if not -0.3 <= self.export_fraction <= 0.3:
            raise ValueError("export_fraction must be in [-0.3, 0.3]")
        if self.export_sigma < 0:
            raise ValueError("export_sigma must be >= 0")
        if self.smoothing_hours < 0:
            raise ValueError("smoothing_hours must be >= 0")
        order = {PlantKind(k): int(v) for k, v in dict(self.merit_order).items()}
        object.__setattr__(self, "merit_order", order)

    def check_grid(self, grid: GridSpec) -> None:
        kinds = {p.kind for p in grid.plants}
        missing = kinds - set(self.merit_order)
        if missing:
            raise ValueError(f"merit_order has no rank for {sorted(k.value for k in missing)}")
        ranks = [self.merit_order[k] for k in kinds]
        if len(set(ranks)) != len(ranks):
            raise ValueError("merit_order must rank the grid's plant kinds strictly")


def _bounded_ar1(rng: np.random.Generator, n: int, phi: float) -> np.ndarray:
    z = kernels.ar1_filter(rng.standard_normal(n), phi)
    return np.clip(z, -3.0, 3.0)


def load_series(params: LoadProfileParams, n_steps: int, column_id: str = "") -> np.ndarray:
    rng = np.random.default_rng(column_seed(params.seed, column_id))
    t = np.arange(n_steps, dtype=np.float64)
    # Evening peak near 18h, winter peak at the start of the year, weekday
    # high; each load gets a small phase jitter so series never coincide.
    jitter = rng.uniform(-0.3, 0.3, size=3)
    daily = np.sin(2 * np.pi * (t - 12.0) / 24.0 + jitter[0])
    weekly = np.sin(2 * np.pi * t / 168.0 + 1.0 + jitter[1])
    seasonal = np.cos(2 * np.pi * t / HOURS_PER_YEAR + jitter[2])
    shape = (
        1.0
        + params.daily_amp * daily
        + params.weekly_amp * weekly
        + params.seasonal_amp * seasonal
    )
    if params.noise_sigma > 0:
        shape = shape + params.noise_sigma * _bounded_ar1(rng, n_steps, _NOISE_PHI)
    return params.base_mw * shape


def gen_loads(
    grid: GridSpec,
    years: int,
    params: LoadProfileParams | Mapping[str, LoadProfileParams],
) -> SeriesFrame:
    """Hourly load series for every load bus, ``years * 8736`` steps long."""
    if int(years) != years or years < 1:
        raise ValueError("years must be a positive integer")
    n = int(years) * HOURS_PER_YEAR
    if isinstance(params, LoadProfileParams):
        per_load = {lid: params for lid in grid.load_bus_ids}
    else:
        missing = [lid for lid in grid.load_bus_ids if lid not in params]
        if missing:
            raise ValueError(f"no LoadProfileParams for loads {missing}")
        per_load = dict(params)
    cols = [load_series(per_load[lid], n, lid) for lid in grid.load_bus_ids]
    return SeriesFrame(0, grid.load_bus_ids, np.column_stack(cols))


def _fill(p, amount, weight, cap, mask):
    """Add ``amount[t]`` to the plants in ``mask`` proportionally to weight,
    never exceeding ``cap``.  Returns what could not be placed."""
    amount = amount.copy()
    open_ = np.broadcast_to(mask, p.shape) & (p < cap)
    for _ in range(p.shape[1] + 1):
        todo = amount > 1e-12
        if not todo.any():
            break
        w = np.where(open_, weight, 0.0)
        wsum = w.sum(axis=1)
        ok = todo & (wsum > 0)
        if not ok.any():
            break
        share = np.zeros_like(p)
        share[ok] = w[ok] / wsum[ok, None]
        add = share * amount[:, None]
        room = cap - p
        placed = np.minimum(add, room)
        p += placed
        amount = amount - placed.sum(axis=1)
        open_ = open_ & (p < cap - 1e-12)
    return amount


def dispatch_generation(grid: GridSpec, loads: SeriesFrame, params: DispatchParams) -> SeriesFrame:
    """Generation series for every plant such that, at each hour,
    total generation = total load x (1 + export(t))."""
    params.check_grid(grid)
    missing = [lid for lid in grid.load_bus_ids if lid not in loads.columns]
    if missing:
        raise ValueError(f"loads frame lacks load buses {missing}")
    total_load = loads.select(grid.load_bus_ids).sum(axis=1)
    if np.any(~np.isfinite(total_load)) or np.any(total_load <= 0):
        raise ValueError("loads must be finite and positive")
    n = total_load.shape[0]

    export = np.full(n, params.export_fraction)
    if params.export_sigma > 0:
        rng = np.random.default_rng(column_seed(params.seed, "__export__"))
        export = export + params.export_sigma * _bounded_ar1(rng, n, _EXPORT_PHI)
    demand = total_load * (1.0 + export)

    rated = np.array([p.rated_power for p in grid.plants])
    capacity = rated.sum()
    over = np.flatnonzero(demand > capacity + 1e-9)
    if over.size:
        h = int(over[0])
        raise DispatchInfeasible(loads.start_index + h, float(demand[h]), float(capacity))

    nuclear = np.array([p.kind is PlantKind.NUCLEAR for p in grid.plants])
    flexible = ~nuclear
    out = np.zeros((n, grid.n_plants))

    flat = np.array([p.annual_energy / HOURS_PER_YEAR if p.kind is PlantKind.NUCLEAR else 0.0
                     for p in grid.plants])
    nuc_total = flat.sum()
    if nuc_total > 0:
        # nuclear backs off only in the rare hours where it alone exceeds demand
        scale = np.minimum(1.0, demand / nuc_total) if flexible.any() else demand / nuc_total
        out[:, nuclear] = scale[:, None] * flat[nuclear][None, :]
    residual = demand - out.sum(axis=1)

    if not flexible.any():
        if np.any(residual > 1e-6):
            raise DispatchInfeasible(loads.start_index + int(np.argmax(residual)),
                                     float(demand.max()), float(nuc_total))
        return SeriesFrame(loads.start_index, grid.plant_ids, out)

    fidx = np.flatnonzero(flexible)
    energy = np.array([grid.plants[i].annual_energy for i in fidx])
    base_share = energy / energy.sum() if energy.sum() > 0 else rated[fidx] / rated[fidx].sum()

    phi = math.exp(-1.0 / params.smoothing_hours) if params.smoothing_hours > 0 else 0.0
    # Standardized load pattern; each plant reacts to its own random mix of
    # it, standing in for the network-driven part of an OPF dispatch.
    load_vals = loads.select(grid.load_bus_ids)
    sd = load_vals.std(axis=0)
    pattern = (load_vals - load_vals.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    kappa = params.load_coupling
    factors = np.empty((n, fidx.size))
    for j, i in enumerate(fidx):
        plant = grid.plants[i]
        sigma = KIND_VOLATILITY[plant.kind]
        rng = np.random.default_rng(column_seed(params.seed, plant.id))
        z = _bounded_ar1(rng, n, phi)
        if kappa > 0:
            mix = pattern @ rng.standard_normal(pattern.shape[1])
            msd = mix.std()
            if msd > 0:
                z = math.sqrt(kappa) * np.clip(mix / msd, -3.0, 3.0) + math.sqrt(1.0 - kappa) * z
        factors[:, j] = np.exp(sigma * z - 0.5 * sigma * sigma)

    cap = np.broadcast_to(rated[fidx], (n, fidx.size))
    ranks = np.array([params.merit_order[grid.plants[i].kind] for i in fidx])
    years = np.arange(n) // HOURS_PER_YEAR
    share = np.tile(base_share, (int(years.max()) + 1, 1))

    def _split(share_by_year):
        w = share_by_year[years] * factors
        p = residual[:, None] * w / w.sum(axis=1, keepdims=True)
        overflow = np.maximum(p - cap, 0.0).sum(axis=1)
        np.minimum(p, cap, out=p)
        for r in sorted(set(ranks.tolist())):
            overflow = _fill(p, overflow, w, cap, ranks == r)
        if np.any(overflow > 1e-6):
            raise DispatchInfeasible(loads.start_index + int(np.argmax(overflow)),
                                     float(demand.max()), float(capacity))
        return p

    # A few multiplicative corrections pull each plant's yearly energy onto
    # its share of the yearly residual demand, undoing the bias from clipping.
    p = _split(share)
    for _ in range(6):
        for y in range(share.shape[0]):
            sel = years == y
            got = p[sel].sum(axis=0)
            want = base_share * residual[sel].sum()
            ratio = np.where(got > 0, want / np.maximum(got, 1e-12), 1.0)
            share[y] *= ratio
            share[y] /= share[y].sum()
        p = _split(share)
    out[:, fidx] = p

    full_year = n >= HOURS_PER_YEAR
    if full_year:
        for i in fidx:
            plant = grid.plants[i]
            if plant.annual_energy <= 0:
                continue
            for y in range(n // HOURS_PER_YEAR):
                got = out[y * HOURS_PER_YEAR:(y + 1) * HOURS_PER_YEAR, i].sum()
                rel = got / plant.annual_energy - 1.0
                if abs(rel) > ANNUAL_ENERGY_TOLERANCE:
                    warnings.warn(
                        f"plant {plant.id} year {y}: energy off target by {rel:+.1%}; "
                        "annual budgets do not match demand (see calibrate_annual_energy)",
                        RuntimeWarning,
                        stacklevel=2,
                    )
                    break
    return SeriesFrame(loads.start_index, grid.plant_ids, out)


def calibrate_annual_energy(grid: GridSpec, loads: SeriesFrame, params: DispatchParams) -> GridSpec:
    """Rescale the non-nuclear annual energies so they add up to the mean
    yearly residual demand implied by ``loads`` and the export fraction."""
    total = loads.select(grid.load_bus_ids).sum(axis=1)
    yearly_demand = total.mean() * (1 + params.export_fraction) * HOURS_PER_YEAR
    nuclear = sum(p.annual_energy for p in grid.plants if p.kind is PlantKind.NUCLEAR)
    flex = [p for p in grid.plants if p.kind is not PlantKind.NUCLEAR]
    budget = sum(p.annual_energy for p in flex)
    if budget <= 0:
        return grid
    scale = (yearly_demand - nuclear) / budget
    plants = []
    for p in grid.plants:
        if p.kind is PlantKind.NUCLEAR:
            plants.append(p)
        else:
            e = min(p.annual_energy * scale, 0.95 * p.rated_power * HOURS_PER_YEAR)
            plants.append(Plant(p.id, p.kind, p.rated_power, e, p.bus_id))
    return GridSpec(grid.name, grid.load_bus_ids, tuple(plants), grid.hours_per_year)


def generate(
    grid: GridSpec,
    years: int,
    load_params: LoadProfileParams | Mapping[str, LoadProfileParams],
    dispatch: DispatchParams,
) -> SeriesFrame:
    """Full frame (loads then plants) for ``grid``."""
    loads = gen_loads(grid, years, load_params)
    gen = dispatch_generation(grid, loads, dispatch)
    return grid_frame(grid, loads, gen)


_KIND_RANGES = {
    # rated power range (MW), capacity factor range
    PlantKind.HYDRO: ((100.0, 300.0), (0.35, 0.5)),
    PlantKind.GAS: ((100.0, 500.0), (0.3, 0.45)),
    PlantKind.COAL: ((300.0, 800.0), (0.55, 0.7)),
    PlantKind.NUCLEAR: ((400.0, 1000.0), (0.85, 0.92)),
}


def synthetic_grid(
    name: str = "desk",
    n_hydro: int = 8,
    n_gas: int = 2,
    n_coal: int = 1,
    n_nuclear: int = 1,
    n_loads: int = 20,
    export_fraction: float = 0.05,
    seed: int = 0,
    load_shape: LoadProfileParams | None = None,
) -> tuple[GridSpec, dict[str, LoadProfileParams]]:
    """A random grid plus per-load parameters whose total demand matches the
    fleet's annual energy budgets."""
    rng = np.random.default_rng(seed)
    plants = []
    counts = [(PlantKind.HYDRO, n_hydro), (PlantKind.GAS, n_gas),
              (PlantKind.COAL, n_coal), (PlantKind.NUCLEAR, n_nuclear)]
    prefix = {PlantKind.HYDRO: "H", PlantKind.GAS: "G", PlantKind.COAL: "C", PlantKind.NUCLEAR: "N"}
    for kind, count in counts:
        (lo, hi), (cf_lo, cf_hi) = _KIND_RANGES[kind]
        for i in range(count):
            rated = float(np.round(rng.uniform(lo, hi)))
            cf = float(rng.uniform(cf_lo, cf_hi))
            pid = f"{prefix[kind]}{i + 1:02d}"
            plants.append(Plant(pid, kind, rated, round(rated * cf * HOURS_PER_YEAR), f"bus_{pid}"))
    mean_gen = sum(p.annual_energy for p in plants) / HOURS_PER_YEAR
    mean_load = mean_gen / (1 + export_fraction)
    raw = rng.lognormal(0.0, 0.5, size=n_loads)
    bases = mean_load * raw / raw.sum()
    shape = load_shape or LoadProfileParams(base_mw=1.0)
    load_ids = [f"L{i + 1:03d}" for i in range(n_loads)]
    params = {
        lid: LoadProfileParams(
            base_mw=float(b),
            daily_amp=shape.daily_amp,
            weekly_amp=shape.weekly_amp,
            seasonal_amp=shape.seasonal_amp,
            noise_sigma=shape.noise_sigma,
            seed=seed,
        )
        for lid, b in zip(load_ids, bases)
    }
    return GridSpec(name, tuple(load_ids), tuple(plants)), params
