"""Multi-layer perceptron trained with Adam on mini-batches.

ReLU hidden layers.  Classifier: single logit, binary cross-entropy.
Regressor: linear output, mean squared error on a standardized target.
Training keeps the weights of the best validation epoch and stops after
``patience`` epochs without improvement or at ``max_epochs``.
"""

from __future__ import annotations

import numpy as np

from gridwatch.detectors.base import freeze

BATCH_SIZE = 128
MAX_EPOCHS = 200
PATIENCE = 10


def forward(params, X):
    """Return (output logits/values of shape (n,), cached activations)."""
    acts = [X]
    pre = []
    a = X
    last = len(params) - 1
    for i, (W, b) in enumerate(params):
        z = a @ W + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < last else z
        acts.append(a)
    return a[:, 0], (acts, pre)


def loss_and_grads(params, X, y, task):
    """Mean loss and its gradient w.r.t. every (W, b)."""
    out, (acts, pre) = forward(params, X)
    n = X.shape[0]
    if task == "classification":
        loss = float(np.mean(np.logaddexp(0.0, out) - y * out))
        p = 0.5 * (1.0 + np.tanh(0.5 * out))
        delta = (p - y) / n
    else:
        r = out - y
        loss = float(np.mean(r * r))
        delta = 2.0 * r / n
    delta = delta[:, None]
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W.T) * (pre[i - 1] > 0)
    return loss, grads


def init_params(n_in, hidden, rng):
    sizes = [n_in] + list(hidden) + [1]
    params = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        std = np.sqrt(2.0 / a) if i < len(sizes) - 2 else np.sqrt(1.0 / a)
        params.append((rng.normal(0.0, std, size=(a, b)), np.zeros(b)))
    return params


def _f2(y_true, y_pred):
    tp = float(np.sum(y_true & y_pred))
    fn = float(np.sum(y_true & ~y_pred))
    fp = float(np.sum(~y_true & y_pred))
    den = 5 * tp + 4 * fn + fp
    return 5 * tp / den if den > 0 else np.nan


class MLP:
    def __init__(self, task, hidden_layers=2, width=50, max_epochs=MAX_EPOCHS,
                 batch_size=BATCH_SIZE, learning_rate=1e-3, patience=PATIENCE,
                 val_fraction=0.1, seed=0, params=None, y_mean=0.0, y_scale=1.0):
        if task not in ("classification", "regression"):
            raise ValueError(f"unknown task {task!r}")
        if not 1 <= int(hidden_layers) <= 4:
            raise ValueError("hidden_layers must be in 1..4")
        self.task = task
        self.hidden = [int(width)] * int(hidden_layers)
        self.max_epochs = min(int(max_epochs), MAX_EPOCHS)
        self.batch_size = int(batch_size)
        self.learning_rate = float(learning_rate)
        self.patience = int(patience)
        self.val_fraction = float(val_fraction)
        self.seed = seed
        self.params = params
        self.y_mean = float(y_mean)
        self.y_scale = float(y_scale)
        self.epochs_run = 0
        self.best_epoch = 0
        self.history = []

    @classmethod
    def from_hyper(cls, hyper, seed, task):
        keys = ("hidden_layers", "width", "max_epochs", "batch_size", "learning_rate",
                "patience", "val_fraction")
        return cls(task, seed=seed, **{k: hyper[k] for k in keys if k in hyper})

    def _target(self, y):
        if self.task == "classification":
            return y.astype(np.float64)
        return (y - self.y_mean) / self.y_scale

    def _score(self, params, X, y):
        """Validation score, higher is better."""
        out, _ = forward(params, X)
        if self.task == "classification":
            f2 = _f2(y.astype(bool), out >= 0.0)
            if np.isfinite(f2):
                return f2
            return -float(np.mean(np.logaddexp(0.0, out) - y * out))
        r = out - self._target(y)
        return -float(np.mean(r * r))

    def fit(self, X, y):
        rng = np.random.default_rng(self.seed)
        n = X.shape[0]
        if self.task == "regression":
            self.y_mean = float(np.mean(y))
            sd = float(np.std(y))
            # constant target: shrink the output scale so any residual network
            # output vanishes and predictions equal the constant
            self.y_scale = sd if sd > 0 else 1e-9 * max(abs(self.y_mean), 1.0)
        perm = rng.permutation(n)
        n_val = int(round(self.val_fraction * n)) if n >= 20 else 0
        val, fit = perm[:n_val], perm[n_val:]
        Xf, yf = X[fit], self._target(y[fit])
        params = init_params(X.shape[1], self.hidden, rng)
        m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        b1, b2, eps = 0.9, 0.999, 1e-8
        step = 0
        best = -np.inf
        best_params = [(W.copy(), b.copy()) for W, b in params]
        stale = 0
        for epoch in range(self.max_epochs):
            order = rng.permutation(Xf.shape[0])
            for start in range(0, order.size, self.batch_size):
                bi = order[start:start + self.batch_size]
                _, grads = loss_and_grads(params, Xf[bi], yf[bi], self.task)
                step += 1
                lr = self.learning_rate * np.sqrt(1 - b2 ** step) / (1 - b1 ** step)
                new = []
                for i, ((W, b), (gW, gb)) in enumerate(zip(params, grads)):
                    mW, mb = m[i]
                    vW, vb = v[i]
                    mW = b1 * mW + (1 - b1) * gW
                    mb = b1 * mb + (1 - b1) * gb
                    vW = b2 * vW + (1 - b2) * gW * gW
                    vb = b2 * vb + (1 - b2) * gb * gb
                    m[i] = (mW, mb)
                    v[i] = (vW, vb)
                    new.append((W - lr * mW / (np.sqrt(vW) + eps), b - lr * mb / (np.sqrt(vb) + eps)))
                params = new
            self.epochs_run = epoch + 1
            if n_val:
                score = self._score(params, X[val], y[val])
            else:
                score = self._score(params, Xf, y[fit])
            self.history.append(score)
            if score > best:
                best = score
                best_params = [(W.copy(), b.copy()) for W, b in params]
                self.best_epoch = epoch + 1
                stale = 0
            else:
                stale += 1
                if stale >= self.patience:
                    break
        self.params = [(freeze(W), freeze(b)) for W, b in best_params]
        return self

    def raw_output(self, X):
        out, _ = forward(self.params, X)
        return out

    def decision(self, X):
        out = self.raw_output(X)
        if self.task == "classification":
            return out
        return out * self.y_scale + self.y_mean

    def predict(self, X):
        if self.task == "classification":
            return self.raw_output(X) >= 0.0
        return self.decision(X)

    def get_state(self):
        flat = []
        for W, b in self.params:
            flat += [W, b]
        return {"weights": flat, "y_mean": self.y_mean, "y_scale": self.y_scale}

    @classmethod
    def from_state(cls, hyper, state, task):
        w = state["weights"]
        params = [(freeze(w[i]), freeze(w[i + 1])) for i in range(0, len(w), 2)]
        est = cls.from_hyper(hyper, 0, task)
        est.params = params
        est.y_mean = float(state["y_mean"])
        est.y_scale = float(state["y_scale"])
        return est

    @staticmethod
    def complexity(hyper, n_features):
        width = hyper["width"]
        layers = hyper["hidden_layers"]
        return n_features * width + (layers - 1) * width * width + width
