"""Regular-vs-attacked distributions along simple grid-level metrics.

Each panel returns per-step (x, y) coordinates plus the attack labels so the
two populations can be plotted or compared:

* ``total_lag``: total generation at t-1 against t;
* ``total_vs_target``: change of total generation against change of the
  target, both over one step;
* ``target_steps``: the target's two-step change (t-1 -> t+1) against its
  one-step change (t-1 -> t).  Single-step on/off excursions land far from
  the diagonal, a pattern regular operation rarely produces.
"""

from __future__ import annotations

import numpy as np

from gridwatch.attacks import LabeledDataset
from gridwatch.grid_model import GridSpec

PANELS = ("total_lag", "total_vs_target", "target_steps")


def _total(dataset: LabeledDataset, grid: GridSpec) -> np.ndarray:
    return dataset.reported.select(grid.plant_ids).sum(axis=1)


def anomaly_panels(dataset: LabeledDataset, grid: GridSpec) -> dict:
    total = _total(dataset, grid)
    target = dataset.reported.column(dataset.target)
    prev_total = np.roll(total, 1)
    prev = np.roll(target, 1)
    nxt = np.roll(target, -1)
    return {
        "labels": dataset.labels.copy(),
        "total_lag": (prev_total, total),
        "total_vs_target": (target - prev, total - prev_total),
        "target_steps": (target - prev, nxt - prev),
    }


def panel_summary(panels: dict) -> dict:
    """Per panel and class: mean and standard deviation of x and y, and the
    fraction of points off the x = y diagonal by more than a quarter of the
    x range (the "separated" share)."""
    labels = panels["labels"]
    out = {}
    for name in PANELS:
        x, y = panels[name]
        span = float(np.ptp(x)) or 1.0
        entry = {}
        for cls, mask in (("regular", ~labels), ("attacked", labels)):
            if not mask.any():
                entry[cls] = None
                continue
            entry[cls] = {
                "n": int(mask.sum()),
                "x_mean": float(x[mask].mean()),
                "x_std": float(x[mask].std()),
                "y_mean": float(y[mask].mean()),
                "y_std": float(y[mask].std()),
                "off_diagonal": float(np.mean(np.abs(x[mask] - y[mask]) > 0.25 * span)),
            }
        out[name] = entry
    return out
