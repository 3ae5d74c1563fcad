"""Bagged ensemble of CART trees with balanced class weights."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyTrainingSet, SingleClassTrainingSet
from .tree import Tree, train_tree


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 200
    max_depth: int | None = 10
    max_features: str | int | None = "sqrt"
    min_samples_split: int = 5
    min_samples_leaf: int = 2
    class_weight: str | None = "balanced"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1 or self.min_samples_split < 2 or self.min_samples_leaf < 1:
            raise ValueError(f"invalid forest config {self}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.class_weight not in (None, "balanced"):
            raise ValueError("class_weight must be None or 'balanced'")

    def n_split_features(self, d: int) -> int:
        if self.max_features is None:
            return d
        if self.max_features == "sqrt":
            return max(1, math.ceil(math.sqrt(d)))
        return max(1, min(int(self.max_features), d))


def balanced_weights(y) -> np.ndarray:
    """Per-sample weight n / (k * n_c) for the sample's class c."""
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    per_class = dict(zip(classes.tolist(), (len(y) / (len(classes) * counts)).tolist()))
    return np.array([per_class[c] for c in y.tolist()], dtype=float)


@dataclass
class RandomForest:
    trees: list[Tree]
    n_features: int

    def predict_proba(self, X) -> np.ndarray:
        acc = np.zeros((len(X), 2))
        for t in self.trees:
            acc += t.predict_value(X)
        return acc / len(self.trees)


def _check_two_classes(y):
    if len(y) == 0:
        raise EmptyTrainingSet("no training rows")
    if len(np.unique(y)) < 2:
        raise SingleClassTrainingSet(f"training labels contain only class {int(y[0])}")


def train_random_forest(X, y, config: ForestConfig = ForestConfig(), n_jobs: int = 1) -> RandomForest:
    """Fit ``config.n_estimators`` trees on bootstrap resamples.

    Tree ``i`` draws from its own generator spawned from ``config.seed``, so
    the result does not depend on ``n_jobs``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    _check_two_classes(y)
    n, d = X.shape
    w = balanced_weights(y) if config.class_weight == "balanced" else np.ones(n)
    m = config.n_split_features(d)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_estimators)

    def fit_one(ss):
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        return train_tree(X[idx], y[idx], w[idx], max_depth=config.max_depth,
                          min_samples_split=config.min_samples_split,
                          min_samples_leaf=config.min_samples_leaf, max_features=m, rng=rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(fit_one, seeds))
    else:
        trees = [fit_one(ss) for ss in seeds]
    return RandomForest(trees, d)
