"""Test / threshold-holdout / cross-validation row assignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TEST_FRACTION = 0.2
HOLDOUT_FRACTION = 0.2
N_FOLDS = 5


def _round(x: float) -> int:
    return int(np.floor(x + 0.5 + 1e-9))


@dataclass(frozen=True, eq=False)
class SplitPlan:
    """All index arrays are sorted time-step indices.

    ``train`` = everything not in ``test``.  ``holdout`` (threshold fitting
    for residual detectors) is a subset of ``train``; ``fit = train -
    holdout``.  ``folds`` partition ``fit`` (unsupervised protocol);
    ``supervised_folds`` partition all of ``train``.
    """

    n_rows: int
    seed: int
    test: np.ndarray
    train: np.ndarray
    holdout: np.ndarray
    fit: np.ndarray
    folds: tuple
    supervised_folds: tuple

    def folds_for(self, supervised: bool) -> tuple:
        return self.supervised_folds if supervised else self.folds

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "seed": self.seed,
            "n_test": int(self.test.size),
            "n_holdout": int(self.holdout.size),
            "fold_sizes": [int(f.size) for f in self.folds],
            "supervised_fold_sizes": [int(f.size) for f in self.supervised_folds],
        }


def _partition(rows: np.ndarray, n_folds: int, rng: np.random.Generator) -> tuple:
    perm = rng.permutation(rows)
    return tuple(np.sort(part) for part in np.array_split(perm, n_folds))


def make_split(n_rows: int, seed: int = 0, test_fraction: float = TEST_FRACTION,
               holdout_fraction: float = HOLDOUT_FRACTION, n_folds: int = N_FOLDS) -> SplitPlan:
    if n_rows < 10:
        raise ValueError("need at least 10 rows to split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_rows)
    n_test = _round(test_fraction * n_rows)
    test = np.sort(perm[:n_test])
    train = np.sort(perm[n_test:])
    n_hold = _round(holdout_fraction * train.size)
    hold_perm = rng.permutation(train)
    holdout = np.sort(hold_perm[:n_hold])
    fit = np.sort(hold_perm[n_hold:])
    folds = _partition(fit, n_folds, rng)
    sup = _partition(train, n_folds, rng)
    return SplitPlan(n_rows, seed, test, train, holdout, fit, folds, sup)
