"""Hot inner loops, each in a numba flavour and a pure-numpy flavour.

The public names (``ar1_filter``, ``knn_neighbors``, ``svm_dcd_epoch``,
``node_histogram``, ``tree_apply``) point at whichever backend
:mod:`gridwatch._accel` selected at import time.  Both implementations are
always importable as ``<name>_numba`` / ``<name>_numpy`` so tests and the
benchmark can compare them side by side.
"""

import math

import numpy as np

from gridwatch._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# AR(1) filter: y[0] = e[0];  y[t] = phi*y[t-1] + sqrt(1-phi^2)*e[t]
# Unit-variance stationary output for unit-variance innovations.
# ---------------------------------------------------------------------------


@njit
def ar1_filter_numba(innov, phi):
    n = innov.shape[0]
    out = np.empty(n)
    if n == 0:
        return out
    gain = math.sqrt(1.0 - phi * phi)
    out[0] = innov[0]
    for t in range(1, n):
        out[t] = phi * out[t - 1] + gain * innov[t]
    return out


def ar1_filter_numpy(innov, phi):
    innov = np.asarray(innov, dtype=np.float64)
    n = innov.shape[0]
    out = np.empty(n)
    if n == 0:
        return out
    if phi == 0.0:
        out[:] = innov
        return out
    gain = math.sqrt(1.0 - phi * phi)
    drive = gain * innov
    drive[0] = innov[0]
    # Closed form inside blocks short enough that phi**-block stays finite.
    block = int(max(1, min(n, 300.0 / -math.log(abs(phi)))))
    state = 0.0
    for start in range(0, n, block):
        seg = drive[start:start + block]
        k = np.arange(seg.shape[0], dtype=np.float64)
        up = phi ** -k
        down = phi ** k
        acc = np.cumsum(seg * up) * down
        acc += state * phi * down
        out[start:start + seg.shape[0]] = acc
        state = acc[-1]
    return out


# ---------------------------------------------------------------------------
# k nearest neighbours: indices sorted by (distance, training index)
# ---------------------------------------------------------------------------


@njit
def knn_neighbors_numba(train, query, k):
    n, d = train.shape
    m = query.shape[0]
    out = np.empty((m, k), dtype=np.int64)
    best_d = np.empty(k)
    best_i = np.empty(k, dtype=np.int64)
    for q in range(m):
        filled = 0
        for j in range(n):
            s = 0.0
            for f in range(d):
                diff = train[j, f] - query[q, f]
                s += diff * diff
            if filled < k:
                pos = filled
                filled += 1
            elif s < best_d[k - 1]:
                pos = k - 1
            else:
                continue
            # insertion keeps (distance, index) order; equal distances keep the
            # earlier training index first since j increases monotonically
            while pos > 0 and best_d[pos - 1] > s:
                best_d[pos] = best_d[pos - 1]
                best_i[pos] = best_i[pos - 1]
                pos -= 1
            best_d[pos] = s
            best_i[pos] = j
        for r in range(k):
            out[q, r] = best_i[r]
    return out


def knn_neighbors_numpy(train, query, k, chunk=256):
    train = np.asarray(train, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    n = train.shape[0]
    sq_train = np.einsum("ij,ij->i", train, train)
    out = np.empty((query.shape[0], k), dtype=np.int64)
    cols = np.arange(n)
    for start in range(0, query.shape[0], chunk):
        q = query[start:start + chunk]
        dist = sq_train[None, :] - 2.0 * (q @ train.T)
        dist += np.einsum("ij,ij->i", q, q)[:, None]
        np.maximum(dist, 0.0, out=dist)
        if k < n:
            part = np.argpartition(dist, k - 1, axis=1)[:, :k]
        else:
            part = np.broadcast_to(cols, dist.shape)
        rows = np.arange(q.shape[0])[:, None]
        pd = dist[rows, part]
        order = np.lexsort((part, pd), axis=1)
        out[start:start + q.shape[0]] = np.take_along_axis(part, order, axis=1)
    return out


# ---------------------------------------------------------------------------
# Linear SVM, one epoch of dual coordinate descent (L1 hinge loss).
# Mutates alpha and w in place; returns the projected-gradient spread.
# ---------------------------------------------------------------------------


@njit
def svm_dcd_epoch_numba(X, y, alpha, w, qdiag, C, order):
    d = X.shape[1]
    pg_max = -np.inf
    pg_min = np.inf
    for ii in range(order.shape[0]):
        i = order[ii]
        if qdiag[i] <= 0.0:
            continue
        g = 0.0
        for f in range(d):
            g += w[f] * X[i, f]
        g = y[i] * g - 1.0
        a = alpha[i]
        if a == 0.0:
            pg = min(g, 0.0)
        elif a == C:
            pg = max(g, 0.0)
        else:
            pg = g
        pg_max = max(pg_max, pg)
        pg_min = min(pg_min, pg)
        if pg != 0.0:
            new = min(max(a - g / qdiag[i], 0.0), C)
            delta = (new - a) * y[i]
            alpha[i] = new
            for f in range(d):
                w[f] += delta * X[i, f]
    return pg_max - pg_min


def svm_dcd_epoch_numpy(X, y, alpha, w, qdiag, C, order):
    pg_max = -np.inf
    pg_min = np.inf
    for i in order:
        if qdiag[i] <= 0.0:
            continue
        xi = X[i]
        g = y[i] * float(w @ xi) - 1.0
        a = alpha[i]
        if a == 0.0:
            pg = min(g, 0.0)
        elif a == C:
            pg = max(g, 0.0)
        else:
            pg = g
        pg_max = max(pg_max, pg)
        pg_min = min(pg_min, pg)
        if pg != 0.0:
            new = min(max(a - g / qdiag[i], 0.0), C)
            alpha[i] = new
            w += ((new - a) * y[i]) * xi
    return pg_max - pg_min


# ---------------------------------------------------------------------------
# Two-channel histogram of a tree node: hist[f, b, c] = sum of channel c over
# the node's samples whose feature features[f] falls in bin b.
# ---------------------------------------------------------------------------


@njit
def node_histogram_numba(binned, idx, features, ch0, ch1, nbins):
    nf = features.shape[0]
    hist = np.zeros((nf, nbins, 2))
    for r in range(idx.shape[0]):
        i = idx[r]
        a = ch0[i]
        b = ch1[i]
        for jf in range(nf):
            bn = binned[i, features[jf]]
            hist[jf, bn, 0] += a
            hist[jf, bn, 1] += b
    return hist


def node_histogram_numpy(binned, idx, features, ch0, ch1, nbins):
    nf = features.shape[0]
    sub = binned[np.ix_(idx, features)].astype(np.int64)
    sub += (np.arange(nf, dtype=np.int64) * nbins)[None, :]
    flat = sub.ravel()
    w0 = np.repeat(ch0[idx], nf)
    w1 = np.repeat(ch1[idx], nf)
    size = nf * nbins
    hist = np.empty((nf, nbins, 2))
    hist[:, :, 0] = np.bincount(flat, weights=w0, minlength=size).reshape(nf, nbins)
    hist[:, :, 1] = np.bincount(flat, weights=w1, minlength=size).reshape(nf, nbins)
    return hist


# ---------------------------------------------------------------------------
# Route samples to leaves.  Internal nodes have left >= 0; x <= threshold
# goes left.
# ---------------------------------------------------------------------------


@njit
def tree_apply_numba(X, feature, threshold, left, right):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while left[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def tree_apply_numpy(X, feature, threshold, left, right):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        cur = node[active]
        internal = left[cur] >= 0
        active = active[internal]
        cur = cur[internal]
        if not active.size:
            break
        go_left = X[active, feature[cur]] <= threshold[cur]
        node[active] = np.where(go_left, left[cur], right[cur])
    return node


if USE_NUMBA:
    ar1_filter = ar1_filter_numba
    knn_neighbors = knn_neighbors_numba
    svm_dcd_epoch = svm_dcd_epoch_numba
    node_histogram = node_histogram_numba
    tree_apply = tree_apply_numba
else:
    ar1_filter = ar1_filter_numpy
    knn_neighbors = knn_neighbors_numpy
    svm_dcd_epoch = svm_dcd_epoch_numpy
    node_histogram = node_histogram_numpy
    tree_apply = tree_apply_numpy
