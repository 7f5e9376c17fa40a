"""Trained-model container and (de)serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gridwatch.dataio import UnsupportedVersionError, atomic_write
from gridwatch.features import Scaling

MODEL_SCHEMA_VERSION = 1

CLASSIFIERS = ("NBC", "KNNC", "SVC", "RFC", "GBC", "MLPC")
REGRESSORS = ("MLPR",)
# distance- and gradient-based methods get standardized inputs; trees and NB don't
SCALED_ALGOS = frozenset({"KNNC", "SVC", "MLPC", "MLPR"})


class TrainingError(RuntimeError):
    pass


def freeze(arr) -> np.ndarray:
    a = np.array(arr, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted estimator plus everything needed to apply it to raw features."""

    algo: str
    estimator: object
    hyper: dict
    n_features: int
    scaling: Scaling | None = None
    meta: dict = field(default_factory=dict)

    @property
    def task(self) -> str:
        return "regression" if self.algo in REGRESSORS else "classification"

    def _prepare(self, X) -> tuple[np.ndarray, bool]:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"width mismatch: model expects {self.n_features} features, got {X.shape[-1]}")
        if self.scaling is not None:
            X = self.scaling.transform(X)
        return X, single

    def decision(self, X) -> np.ndarray:
        X, single = self._prepare(X)
        out = self.estimator.decision(X)
        return out[0] if single else out

    def predict(self, X):
        X, single = self._prepare(X)
        out = self.estimator.predict(X)
        return out[0] if single else out


# -- serialization -----------------------------------------------------------


def _encode(obj, blob: list | None):
    if isinstance(obj, np.ndarray):
        if blob is not None and obj.dtype == np.float64 and obj.size > 16:
            offset = sum(len(b) for b in blob)
            blob.append(np.ascontiguousarray(obj).astype("<f8").tobytes())
            return {"__blob__": offset, "shape": list(obj.shape), "dtype": "<f8"}
        return {"__array__": obj.ravel().tolist(), "shape": list(obj.shape), "dtype": obj.dtype.str}
    if isinstance(obj, dict):
        return {str(k): _encode(v, blob) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v, blob) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _decode(obj, blob: bytes | None):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.asarray(obj["__array__"], dtype=np.dtype(obj["dtype"])).reshape(obj["shape"])
        if "__blob__" in obj:
            if blob is None:
                raise ValueError("model references a weight blob that is missing")
            n = int(np.prod(obj["shape"])) if obj["shape"] else 1
            start = obj["__blob__"]
            raw = blob[start:start + 8 * n]
            if len(raw) != 8 * n:
                raise ValueError("weight blob truncated")
            return np.frombuffer(raw, dtype="<f8").reshape(obj["shape"]).astype(np.float64)
        return {k: _decode(v, blob) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v, blob) for v in obj]
    return obj


def model_to_document(model: TrainedModel, use_blob: bool = False) -> tuple[dict, bytes | None]:
    blob: list | None = [] if use_blob else None
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "algo": model.algo,
        "task": model.task,
        "hyper": _encode(model.hyper, None),
        "n_features": model.n_features,
        "scaling": model.scaling.to_dict() if model.scaling is not None else None,
        "meta": _encode(model.meta, None),
        "state": _encode(model.estimator.get_state(), blob),
    }
    return doc, (b"".join(blob) if blob is not None else None)


def model_from_document(doc: dict, blob: bytes | None = None) -> TrainedModel:
    from gridwatch.detectors import estimator_class

    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise UnsupportedVersionError(f"unsupported model schema_version {doc.get('schema_version')!r}")
    algo = doc["algo"]
    hyper = _decode(doc["hyper"], None)
    state = _decode(doc["state"], blob)
    est = estimator_class(algo).from_state(hyper, state)
    scaling = Scaling.from_dict(doc["scaling"]) if doc.get("scaling") else None
    return TrainedModel(algo, est, hyper, int(doc["n_features"]), scaling, _decode(doc["meta"], None))


def save_model(model: TrainedModel, path) -> Path:
    """JSON document; MLP weights go to a ``<path>.bin`` blob next to it."""
    path = Path(path)
    use_blob = model.algo in ("MLPC", "MLPR")
    doc, blob = model_to_document(model, use_blob)
    if blob is not None:
        doc["blob"] = path.name + ".bin"
        with atomic_write(path.with_name(path.name + ".bin"), "wb") as fh:
            fh.write(blob)
    with atomic_write(path) as fh:
        json.dump(doc, fh, sort_keys=True)
    return path


def load_model(path) -> TrainedModel:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    blob = None
    if doc.get("blob"):
        blob = path.with_name(doc["blob"]).read_bytes()
    return model_from_document(doc, blob)
