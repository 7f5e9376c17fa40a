"""Gaussian naive Bayes."""

import numpy as np

from gridwatch.detectors.base import freeze


class GaussianNB:
    var_smoothing = 1e-9

    def __init__(self, priors=None, mean=None, var=None):
        self.priors = priors
        self.mean = mean
        self.var = var

    @classmethod
    def from_hyper(cls, hyper, seed):
        return cls()

    def fit(self, X, y):
        y = y.astype(bool)
        eps = self.var_smoothing * float(np.max(X.var(axis=0))) if X.size else 0.0
        mean, var, priors = [], [], []
        for cls_ in (False, True):
            Xc = X[y == cls_]
            mean.append(Xc.mean(axis=0))
            var.append(Xc.var(axis=0) + eps)
            priors.append(Xc.shape[0] / X.shape[0])
        self.priors = freeze(priors)
        self.mean = freeze(mean)
        # an exactly constant training set would leave var == 0
        self.var = freeze(np.maximum(np.asarray(var), np.finfo(float).tiny))
        return self

    def joint_log_likelihood(self, X):
        out = np.empty((X.shape[0], 2))
        for c in range(2):
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.var[c]))
            ll = ll - 0.5 * np.sum((X - self.mean[c]) ** 2 / self.var[c], axis=1)
            out[:, c] = np.log(self.priors[c]) + ll
        return out

    def decision(self, X):
        jll = self.joint_log_likelihood(X)
        return jll[:, 1] - jll[:, 0]

    def predict(self, X):
        return self.decision(X) >= 0.0

    def get_state(self):
        return {"priors": self.priors, "mean": self.mean, "var": self.var}

    @classmethod
    def from_state(cls, hyper, state):
        return cls(freeze(state["priors"]), freeze(state["mean"]), freeze(state["var"]))

    @staticmethod
    def complexity(hyper, n_features):
        return 4 * n_features + 2
