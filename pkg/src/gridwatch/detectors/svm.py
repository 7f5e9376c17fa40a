"""Linear soft-margin SVM solved by dual coordinate descent.

Minimises 0.5*||w||^2 + C * sum(max(0, 1 - y_i (w.x_i + b))) with the bias
folded in as a constant feature (so it is regularised too).

Large C on overlapping classes makes coordinate descent creep, so the primal
objective of every epoch's iterate is evaluated and the best one kept; the
solver stops once the relative duality gap of that iterate drops below
``gap_tol`` (or the projected-gradient spread below ``tol``).
"""

import numpy as np

from gridwatch import kernels
from gridwatch.detectors.base import freeze


class LinearSVC:
    def __init__(self, C, max_epochs=1000, tol=1e-3, seed=0, w=None, gap_tol=1e-3):
        if not C > 0:
            raise ValueError("C must be > 0")
        self.C = float(C)
        self.max_epochs = int(max_epochs)
        self.tol = float(tol)
        self.gap_tol = float(gap_tol)
        self.gap = None
        self.seed = seed
        self.w = w
        self.epochs_run = 0
        self.converged = False

    @classmethod
    def from_hyper(cls, hyper, seed):
        return cls(hyper["C"], hyper.get("max_epochs", 1000), hyper.get("tol", 1e-3), seed,
                   gap_tol=hyper.get("gap_tol", 1e-3))

    def fit(self, X, y):
        n, d = X.shape
        Xa = np.empty((n, d + 1))
        Xa[:, :d] = X
        Xa[:, d] = 1.0
        ys = np.where(y.astype(bool), 1.0, -1.0)
        qdiag = np.einsum("ij,ij->i", Xa, Xa)
        alpha = np.zeros(n)
        w = np.zeros(d + 1)
        rng = np.random.default_rng(self.seed)
        best_w, best_p = w.copy(), np.inf
        for epoch in range(self.max_epochs):
            order = rng.permutation(n)
            spread = kernels.svm_dcd_epoch(Xa, ys, alpha, w, qdiag, self.C, order)
            self.epochs_run = epoch + 1
            primal = 0.5 * float(w @ w) + self.C * float(np.maximum(0.0, 1.0 - ys * (Xa @ w)).sum())
            if primal < best_p:
                best_p, best_w = primal, w.copy()
            dual = float(alpha.sum()) - 0.5 * float(w @ w)
            self.gap = (best_p - dual) / max(abs(best_p), 1e-12)
            if spread <= self.tol or self.gap <= self.gap_tol:
                self.converged = True
                break
        self.w = freeze(best_w)
        return self

    def objective(self, X, y):
        ys = np.where(y.astype(bool), 1.0, -1.0)
        margin = ys * self.decision(X)
        return 0.5 * float(self.w @ self.w) + self.C * float(np.maximum(0.0, 1.0 - margin).sum())

    def decision(self, X):
        return X @ self.w[:-1] + self.w[-1]

    def predict(self, X):
        return self.decision(X) >= 0.0

    def get_state(self):
        return {"w": self.w}

    @classmethod
    def from_state(cls, hyper, state):
        return cls(hyper["C"], w=freeze(state["w"]))

    @staticmethod
    def complexity(hyper, n_features):
        return hyper["C"]
