"""k-nearest-neighbour vote on Euclidean distance."""

import numpy as np

from gridwatch import kernels
from gridwatch.detectors.base import freeze


class KNNClassifier:
    def __init__(self, k, X=None, y=None):
        if int(k) < 1:
            raise ValueError("k must be >= 1")
        self.k = int(k)
        self.X = X
        self.y = y

    @classmethod
    def from_hyper(cls, hyper, seed):
        return cls(hyper["k"])

    def fit(self, X, y):
        self.X = freeze(np.ascontiguousarray(X, dtype=np.float64))
        self.y = freeze(y.astype(bool))
        return self

    def neighbors(self, X):
        k = min(self.k, self.X.shape[0])
        return kernels.knn_neighbors(self.X, np.ascontiguousarray(X, dtype=np.float64), k)

    def decision(self, X):
        """Fraction of anomalous neighbours."""
        nb = self.neighbors(X)
        return self.y[nb].mean(axis=1)

    def predict(self, X):
        # a split vote counts as anomalous
        return self.decision(X) >= 0.5

    def get_state(self):
        return {"X": self.X, "y": self.y}

    @classmethod
    def from_state(cls, hyper, state):
        return cls(hyper["k"], freeze(state["X"]), freeze(state["y"].astype(bool)))

    @staticmethod
    def complexity(hyper, n_features):
        # larger k = smoother decision boundary
        return -hyper["k"]
