"""Compare the numba and numpy backends of every hot kernel.

Run ``python3 benchmarks/bench_kernels.py [--repeat N] [--scale S]``.
Both variants are timed on identical inputs after a warm-up call (which
also absorbs JIT compilation), and their outputs are checked for agreement.
"""

import argparse
import time

import numpy as np

from gridwatch import kernels
from gridwatch._accel import HAVE_NUMBA


def _inputs(scale, rng):
    n = int(8736 * scale)
    d = 24
    X = rng.normal(size=(n, d))
    y = np.where(rng.random(n) < 0.1, 1.0, -1.0)
    binned = rng.integers(0, 64, size=(n, d)).astype(np.uint8)
    # a random complete tree of depth 8
    n_int = 2 ** 8 - 1
    n_nodes = 2 * n_int + 1
    left = np.full(n_nodes, -1, dtype=np.int64)
    right = np.full(n_nodes, -1, dtype=np.int64)
    left[:n_int] = 2 * np.arange(n_int) + 1
    right[:n_int] = 2 * np.arange(n_int) + 2
    feature = np.full(n_nodes, -1, dtype=np.int64)
    feature[:n_int] = rng.integers(0, d, size=n_int)
    threshold = rng.normal(size=n_nodes)
    return {
        "ar1_filter": (rng.normal(size=20 * n), 0.92),
        "knn_neighbors": (X, X[: max(1, n // 8)], 5),
        "svm_dcd_epoch": (X, y, np.zeros(n), np.zeros(d), np.einsum("ij,ij->i", X, X) + 0.5,
                          300.0, rng.permutation(n).astype(np.int64)),
        "node_histogram": (binned, np.arange(n, dtype=np.int64), np.arange(d, dtype=np.int64),
                           rng.random(n), rng.random(n), 65),
        "tree_apply": (X, feature, threshold, left, right),
    }


def _copy(args):
    return tuple(a.copy() if isinstance(a, np.ndarray) else a for a in args)


def _time(fn, args, repeat):
    fn(*_copy(args))
    best = np.inf
    out = None
    for _ in range(repeat):
        a = _copy(args)
        t0 = time.perf_counter()
        out = fn(*a)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _agree(a, b):
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-6, atol=1e-8)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="input size, in years of hourly rows")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy backend can run")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<16}{'numpy s':>12}{'numba s':>12}{'speedup':>10}  agree")
    for name, inp in _inputs(args.scale, rng).items():
        t_np, out_np = _time(getattr(kernels, f"{name}_numpy"), inp, args.repeat)
        if HAVE_NUMBA:
            t_nb, out_nb = _time(getattr(kernels, f"{name}_numba"), inp, args.repeat)
            print(f"{name:<16}{t_np:>12.5f}{t_nb:>12.5f}{t_np / t_nb:>9.1f}x  {_agree(out_np, out_nb)}")
        else:
            print(f"{name:<16}{t_np:>12.5f}{'-':>12}{'-':>10}  -")


if __name__ == "__main__":
    main()
