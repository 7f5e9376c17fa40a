"""Independent reference computations used as test oracles.

These are deliberately naive (exact rationals, brute-force loops, direct
indexing) and share no code with the package.
"""

from fractions import Fraction
from math import comb

import numpy as np


def f2_exact(tp, fn, fp):
    den = 5 * tp + 4 * fn + fp
    return None if den == 0 else Fraction(5 * tp, den)


def f2_from_flags(labels, flags):
    tp = sum(1 for l, f in zip(labels, flags) if l and f)
    fn = sum(1 for l, f in zip(labels, flags) if l and not f)
    fp = sum(1 for l, f in zip(labels, flags) if not l and f)
    return f2_exact(tp, fn, fp)


def best_f2_scan(residuals, labels):
    """Max F2 over every threshold between consecutive distinct residuals
    (and below the smallest)."""
    u = sorted(set(float(r) for r in residuals))
    cands = [u[0] / 2] + [(a + b) / 2 for a, b in zip(u[:-1], u[1:])]
    best = Fraction(-1)
    for tau in cands:
        f = f2_from_flags(labels, [r > tau for r in residuals])
        if f is not None and f > best:
            best = f
    return best


def n_combinations(n, m):
    return comb(n, m)


def feature_row(frame_rep, frame_hist, target, context, loads, t, h, classification, full, all_inj):
    """Feature vector at t by direct indexing (the documented layout)."""
    n = frame_rep.n_steps
    row = []
    if classification:
        row.append(frame_rep.column(target)[t])
    row += [frame_hist.column(target)[(t - k) % n] for k in range(1, h + 1)]
    row += [frame_rep.column(c)[t] for c in context]
    if full:
        row += [frame_hist.column(c)[(t - k) % n] for k in range(1, h + 1) for c in context]
    if all_inj:
        row += [frame_rep.column(c)[t] for c in loads]
        if full:
            row += [frame_hist.column(c)[(t - k) % n] for k in range(1, h + 1) for c in loads]
    return np.array(row)


def gaussian_posterior_1(x, classes, smoothing=0.0):
    """P(class 1 | x) for 1-D Gaussian NB with MLE variances and empirical
    priors; ``smoothing`` is added to both class variances."""
    logp = []
    total = sum(len(v) for v in classes)
    for v in classes:
        v = np.asarray(v, dtype=float)
        mu, var = v.mean(), v.var() + smoothing
        logp.append(np.log(len(v) / total) - 0.5 * np.log(2 * np.pi * var) - (x - mu) ** 2 / (2 * var))
    m = max(logp)
    e = [np.exp(l - m) for l in logp]
    return e[1] / sum(e)


def r2_exact(y, yhat):
    y = [Fraction(v) for v in y]
    yhat = [Fraction(v) for v in yhat]
    mean = sum(y) / len(y)
    ss_res = sum((a - b) ** 2 for a, b in zip(y, yhat))
    ss_tot = sum((a - mean) ** 2 for a in y)
    return 1 - ss_res / ss_tot
