"""Bounded worker pool; results always come back in input order."""

import os
from concurrent.futures import ProcessPoolExecutor


def worker_count(explicit=None) -> int:
    if explicit:
        return max(1, int(explicit))
    env = os.environ.get("GRIDWATCH_WORKERS", "").strip()
    return max(1, int(env)) if env else 1


def pmap(fn, items, workers=1):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
