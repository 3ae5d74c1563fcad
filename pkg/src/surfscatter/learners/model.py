"""Trained-model wrapper, prediction, and versioned JSON serialization."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, ModelFormatError
from .forest import ForestConfig, RandomForest, train_random_forest
from .gbdt import BoostConfig, BoostedTrees, train_gbdt
from .mlp import Mlp, MlpConfig, train_mlp
from .scaling import Standardizer, fit_standardizer
from .tree import Tree

FORMAT_NAME = "surfscatter-model"
FORMAT_VERSION = 1

KINDS = {"forest": ForestConfig, "gbdt": BoostConfig, "mlp": MlpConfig}


def kind_of(config) -> str:
    for kind, cls in KINDS.items():
        if isinstance(config, cls):
            return kind
    raise TypeError(f"not a model config: {config!r}")


@dataclass
class Model:
    kind: str
    config: ForestConfig | BoostConfig | MlpConfig
    estimator: RandomForest | BoostedTrees | Mlp
    n_features: int
    standardizer: Standardizer | None = None

    def predict_proba(self, X) -> np.ndarray:
        return predict(self, X).probabilities


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray   # (n, 2): P(low), P(semi)
    labels: np.ndarray

    @property
    def p_semi(self) -> np.ndarray:
        return self.probabilities[:, 1]


def fit_classifier(config, X, y, seed: int | None = None, n_jobs: int = 1) -> Model:
    """Train the model described by ``config``; the network gets z-scored inputs."""
    if seed is not None:
        config = replace(config, seed=int(seed))
    X = np.asarray(X, dtype=float)
    kind = kind_of(config)
    if kind == "forest":
        return Model(kind, config, train_random_forest(X, y, config, n_jobs=n_jobs), X.shape[1])
    if kind == "gbdt":
        return Model(kind, config, train_gbdt(X, y, config), X.shape[1])
    scaler = fit_standardizer(X)
    return Model(kind, config, train_mlp(scaler.transform(X), y, config), X.shape[1], scaler)


def predict(model, X) -> Prediction:
    """Class probabilities and argmax labels; equal probabilities give class 0."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got {X.shape[1]}")
    if getattr(model, "standardizer", None) is not None:
        X = model.standardizer.transform(X)
    est = getattr(model, "estimator", model)
    probs = np.asarray(est.predict_proba(X), dtype=float).reshape(len(X), 2)
    probs = probs / probs.sum(axis=1, keepdims=True)
    labels = (probs[:, 1] > probs[:, 0]).astype(np.int64)
    return Prediction(probs, labels)


def _estimator_to_dict(model: Model) -> dict:
    est = model.estimator
    if isinstance(est, RandomForest):
        return {"trees": [t.to_dict() for t in est.trees]}
    if isinstance(est, BoostedTrees):
        return {"base_margin": est.base_margin, "learning_rate": est.learning_rate,
                "trees": [t.to_dict() for t in est.trees]}
    return {"params": [p.tolist() for p in est.params], "epochs_trained": est.epochs_trained}


def model_to_dict(model: Model) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "config": asdict(model.config),
        "n_features": model.n_features,
        "standardizer": None if model.standardizer is None else model.standardizer.to_dict(),
        "estimator": _estimator_to_dict(model),
    }


def model_from_dict(d: dict) -> Model:
    if d.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a serialized surfscatter model")
    if d.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {d.get('version')!r}")
    kind = d["kind"]
    if kind not in KINDS:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    cfg = dict(d["config"])
    if kind == "mlp":
        cfg["hidden"] = tuple(cfg["hidden"])
    config = KINDS[kind](**cfg)
    n_features = int(d["n_features"])
    e = d["estimator"]
    if kind == "forest":
        est = RandomForest([Tree.from_dict(t) for t in e["trees"]], n_features)
    elif kind == "gbdt":
        est = BoostedTrees(float(e["base_margin"]), float(e["learning_rate"]),
                           [Tree.from_dict(t) for t in e["trees"]], n_features)
    else:
        est = Mlp([np.asarray(p, dtype=float) for p in e["params"]], n_features, int(e["epochs_trained"]))
    scaler = None if d.get("standardizer") is None else Standardizer.from_dict(d["standardizer"])
    return Model(kind, config, est, n_features, scaler)


def save_model(model: Model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path) -> Model:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model {path}: {exc}") from None
    return model_from_dict(data)
