"""Histogram decision trees, random forest and gradient boosting.

Features are binned once per fit (at most ``max_bins`` bins, edges at
quantiles or midpoints between distinct values).  A split "bin <= b" is
stored as the raw threshold ``edges[b]`` so prediction works on raw values
with ``x <= threshold`` going left.

Split search works on two-channel node histograms:

* ``gini``: channels are the class-0 and class-1 sample weights;
* ``newton``: channels are the gradient and hessian of the logistic loss.
"""

from __future__ import annotations

import math

import numpy as np

from gridwatch import kernels
from gridwatch.detectors.base import freeze

MAX_BINS = 64
_NEWTON_L2 = 1e-6


class Binner:
    def __init__(self, edges):
        self.edges = edges

    @classmethod
    def fit(cls, X, max_bins=MAX_BINS):
        edges = []
        for f in range(X.shape[1]):
            u = np.unique(X[:, f])
            if u.size <= max_bins:
                e = (u[:-1] + u[1:]) / 2.0
            else:
                qs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
                e = np.unique(np.quantile(X[:, f], qs, method="inverted_cdf"))
            edges.append(e)
        return cls(edges)

    @property
    def n_bins(self):
        return max(len(e) for e in self.edges) + 1

    def transform(self, X):
        out = np.empty(X.shape, dtype=np.uint8)
        for f, e in enumerate(self.edges):
            out[:, f] = np.searchsorted(e, X[:, f], side="left")
        return out


class Tree:
    """Flat arrays; internal nodes have ``left >= 0``."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value

    @property
    def n_nodes(self):
        return self.left.shape[0]

    def apply(self, X):
        return kernels.tree_apply(X, self.feature, self.threshold, self.left, self.right)

    def predict_value(self, X):
        return self.value[self.apply(X)]

    def scaled(self, factor):
        return Tree(self.feature, self.threshold, self.left, self.right, freeze(self.value * factor))

    def get_state(self):
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left, "right": self.right, "value": self.value}

    @classmethod
    def from_state(cls, state):
        return cls(
            freeze(np.asarray(state["feature"], dtype=np.int64)),
            freeze(np.asarray(state["threshold"], dtype=np.float64)),
            freeze(np.asarray(state["left"], dtype=np.int64)),
            freeze(np.asarray(state["right"], dtype=np.int64)),
            freeze(np.asarray(state["value"], dtype=np.float64)),
        )


def _best_split(hist, criterion):
    """Return (gain, feature position, bin) of the best split, gain <= 0 if none."""
    left = np.cumsum(hist, axis=1)[:, :-1, :]
    total = hist.sum(axis=1)[:, None, :]
    right = total - left
    with np.errstate(divide="ignore", invalid="ignore"):
        if criterion == "gini":
            nl = left[..., 0] + left[..., 1]
            nr = right[..., 0] + right[..., 1]
            nt = total[..., 0] + total[..., 1]
            score = (left[..., 0] ** 2 + left[..., 1] ** 2) / nl \
                + (right[..., 0] ** 2 + right[..., 1] ** 2) / nr \
                - (total[..., 0] ** 2 + total[..., 1] ** 2) / nt
            valid = (nl > 0) & (nr > 0)
        else:
            gl, hl = left[..., 0], left[..., 1]
            gr, hr = right[..., 0], right[..., 1]
            gt, ht = total[..., 0], total[..., 1]
            score = gl ** 2 / (hl + _NEWTON_L2) + gr ** 2 / (hr + _NEWTON_L2) \
                - gt ** 2 / (ht + _NEWTON_L2)
            valid = (hl > 1e-12) & (hr > 1e-12)
    score = np.where(valid, score, -np.inf)
    flat = int(np.argmax(score))
    f, b = np.unravel_index(flat, score.shape)
    return float(score[f, b]), int(f), int(b)


def build_tree(binned, edges, ch0, ch1, idx, criterion, rng, max_depth=None,
               max_features=None, n_bins=MAX_BINS + 1):
    """Grow one tree over sample positions ``idx``.

    ``max_features`` (int) draws that many candidate features per node.
    """
    d = binned.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []
    all_features = np.arange(d, dtype=np.int64)

    def leaf_value(sel):
        a = float(ch0[sel].sum())
        b = float(ch1[sel].sum())
        if criterion == "gini":
            return b / (a + b) if a + b > 0 else 0.0
        return -a / (b + _NEWTON_L2)

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(left) - 1

    root = new_node()
    stack = [(root, np.asarray(idx, dtype=np.int64), 0)]
    while stack:
        node, sel, depth = stack.pop()
        value[node] = leaf_value(sel)
        if sel.size < 2 or (max_depth is not None and depth >= max_depth):
            continue
        if criterion == "gini":
            a = ch0[sel].sum()
            b = ch1[sel].sum()
            if a <= 0 or b <= 0:
                continue
        if max_features is not None and max_features < d:
            feats = np.sort(rng.choice(d, size=max_features, replace=False)).astype(np.int64)
        else:
            feats = all_features
        hist = kernels.node_histogram(binned, sel, feats, ch0, ch1, n_bins)
        gain, fpos, b = _best_split(hist, criterion)
        if not gain > 1e-12:
            continue
        f = int(feats[fpos])
        go_left = binned[sel, f] <= b
        lnode = new_node()
        rnode = new_node()
        feature[node] = f
        threshold[node] = float(edges[f][b])
        left[node] = lnode
        right[node] = rnode
        stack.append((rnode, sel[~go_left], depth + 1))
        stack.append((lnode, sel[go_left], depth + 1))
    return Tree(
        freeze(np.asarray(feature, dtype=np.int64)),
        freeze(np.asarray(threshold, dtype=np.float64)),
        freeze(np.asarray(left, dtype=np.int64)),
        freeze(np.asarray(right, dtype=np.int64)),
        freeze(np.asarray(value, dtype=np.float64)),
    )


class RandomForest:
    """Bootstrap Gini trees on sqrt(d) candidate features per node; hard
    majority vote, a tied vote counts as anomalous."""

    def __init__(self, n_trees, max_depth=None, seed=0, trees=None):
        if int(n_trees) < 1:
            raise ValueError("n_trees must be >= 1")
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        self.seed = seed
        self.trees = trees or []

    @classmethod
    def from_hyper(cls, hyper, seed):
        return cls(hyper["trees"], hyper.get("max_depth"), seed)

    def fit(self, X, y):
        y = y.astype(bool)
        n, d = X.shape
        binner = Binner.fit(X)
        binned = np.ascontiguousarray(binner.transform(X))
        mf = max(1, int(round(math.sqrt(d))))
        trees = []
        for i in range(self.n_trees):
            # per-tree stream: a forest of n trees is a prefix of one with more
            rng = np.random.default_rng([int(self.seed) & 0xFFFFFFFF, i])
            counts = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
            idx = np.flatnonzero(counts)
            ch0 = counts * ~y
            ch1 = counts * y
            trees.append(build_tree(binned, binner.edges, ch0, ch1, idx, "gini", rng,
                                    self.max_depth, mf, binner.n_bins))
        self.trees = trees
        return self

    def tree_votes(self, X):
        return np.stack([t.predict_value(X) >= 0.5 for t in self.trees], axis=1)

    def decision(self, X):
        return self.tree_votes(X).mean(axis=1)

    def predict(self, X):
        return self.decision(X) >= 0.5

    def get_state(self):
        return {"trees": [t.get_state() for t in self.trees]}

    @classmethod
    def from_state(cls, hyper, state):
        trees = [Tree.from_state(s) for s in state["trees"]]
        return cls(hyper["trees"], hyper.get("max_depth"), trees=trees)

    @staticmethod
    def complexity(hyper, n_features):
        return hyper["trees"]


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_loss(y, F):
    """Mean negative log-likelihood for labels y in {0,1} and logits F."""
    return float(np.mean(np.logaddexp(0.0, F) - y * F))


class GradientBoosting:
    """Additive logit model: F(x) = F0 + sum_m tree_m(x).

    Each stage fits a depth-limited Newton tree to the logistic-loss
    gradients; its leaf values are multiplied by the learning rate and halved
    until the training loss does not increase, so the recorded loss curve is
    non-increasing.
    """

    def __init__(self, n_stages, max_depth=3, learning_rate=0.1, seed=0, f0=0.0, trees=None):
        if int(n_stages) < 1:
            raise ValueError("n_stages must be >= 1")
        self.n_stages = int(n_stages)
        self.max_depth = int(max_depth)
        self.learning_rate = float(learning_rate)
        self.seed = seed
        self.f0 = float(f0)
        self.trees = trees or []
        self.train_loss = []

    @classmethod
    def from_hyper(cls, hyper, seed):
        return cls(hyper["stages"], hyper.get("max_depth", 3), hyper.get("learning_rate", 0.1), seed)

    def fit(self, X, y):
        y = y.astype(np.float64)
        n = X.shape[0]
        binner = Binner.fit(X)
        binned = np.ascontiguousarray(binner.transform(X))
        p0 = y.mean()
        self.f0 = float(math.log(p0 / (1.0 - p0)))
        F = np.full(n, self.f0)
        loss = logistic_loss(y, F)
        self.train_loss = [loss]
        rng = np.random.default_rng(self.seed)
        idx = np.arange(n, dtype=np.int64)
        trees = []
        for _ in range(self.n_stages):
            p = _sigmoid(F)
            g = p - y
            h = p * (1.0 - p)
            tree = build_tree(binned, binner.edges, g, h, idx, "newton", rng,
                              self.max_depth, None, binner.n_bins)
            step = tree.value[tree.apply(X)]
            scale = self.learning_rate
            for _ in range(40):
                new_loss = logistic_loss(y, F + scale * step)
                if new_loss <= loss:
                    break
                scale *= 0.5
            else:
                scale = 0.0
                new_loss = loss
            tree = tree.scaled(scale)
            F = F + scale * step
            loss = new_loss
            trees.append(tree)
            self.train_loss.append(loss)
        self.trees = trees
        return self

    def decision(self, X):
        F = np.full(X.shape[0], self.f0)
        for t in self.trees:
            F += t.predict_value(X)
        return F

    def predict(self, X):
        return self.decision(X) >= 0.0

    def get_state(self):
        return {"f0": self.f0, "trees": [t.get_state() for t in self.trees]}

    @classmethod
    def from_state(cls, hyper, state):
        trees = [Tree.from_state(s) for s in state["trees"]]
        return cls(hyper["stages"], hyper.get("max_depth", 3), hyper.get("learning_rate", 0.1),
                   f0=state["f0"], trees=trees)

    @staticmethod
    def complexity(hyper, n_features):
        return hyper["stages"]
