import json
from pathlib import Path

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from gridwatch.evaluation import make_split

FROZEN = json.loads((Path(__file__).parent / "oracle_values.json").read_text())


def _check(plan):
    assert np.intersect1d(plan.test, plan.train).size == 0
    assert np.array_equal(np.union1d(plan.test, plan.train), np.arange(plan.n_rows))
    assert np.all(np.isin(plan.holdout, plan.train))
    assert np.array_equal(np.union1d(plan.holdout, plan.fit), plan.train)
    for folds, rows in ((plan.folds, plan.fit), (plan.supervised_folds, plan.train)):
        cat = np.concatenate(folds)
        assert np.array_equal(np.sort(cat), rows)
        sizes = [f.size for f in folds]
        assert max(sizes) - min(sizes) <= 1


def test_frozen_examples():
    big, small = FROZEN["split"]
    p = make_split(big["T"], seed=0)
    assert p.test.size == big["test"] and p.holdout.size == big["holdout"]
    q = make_split(small["T"], seed=3)
    assert (q.test.size, q.holdout.size, q.fit.size) == (small["test"], small["holdout"], small["fit"])
    assert [f.size for f in q.folds] == small["folds"]
    _check(p)


def test_determinism():
    a, b = make_split(1000, seed=5), make_split(1000, seed=5)
    assert all(np.array_equal(x, y) for x, y in zip(a.folds, b.folds))
    assert np.array_equal(a.test, b.test)
    assert not np.array_equal(a.test, make_split(1000, seed=6).test)


@settings(max_examples=100, deadline=None)
@given(st.integers(10, 5000), st.integers(0, 2**31))
def test_random_plans(n, seed):
    p = make_split(n, seed)
    assert p.test.size == int(np.floor(0.2 * n + 0.5 + 1e-9))
    _check(p)
