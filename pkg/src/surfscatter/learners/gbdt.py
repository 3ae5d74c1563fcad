"""Second-order gradient boosting of regression trees for the logistic loss."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forest import _check_two_classes
from .tree import Tree, train_boost_tree


@dataclass(frozen=True)
class BoostConfig:
    n_estimators: int = 100
    max_depth: int = 5
    learning_rate: float = 0.1
    subsample: float = 0.8
    colsample_bytree: float = 0.8
    reg_alpha: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 1.0
    min_child_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "subsample", "colsample_bytree"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        for name in ("reg_alpha", "reg_lambda", "gamma", "min_child_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.n_estimators < 0 or self.max_depth < 0:
            raise ValueError("n_estimators and max_depth must be >= 0")


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss(y, margin) -> float:
    """Mean logistic loss for labels in {0, 1} and raw margins."""
    y = np.asarray(y, dtype=float)
    margin = np.asarray(margin, dtype=float)
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


@dataclass
class BoostedTrees:
    base_margin: float
    learning_rate: float
    trees: list[Tree]
    n_features: int
    train_loss: list[float] = field(default_factory=list)

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        margin = np.full(len(X), self.base_margin)
        for t in self.trees:
            margin += self.learning_rate * t.predict_value(X)
        return margin

    def predict_proba(self, X) -> np.ndarray:
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])


def train_gbdt(X, y, config: BoostConfig = BoostConfig()) -> BoostedTrees:
    """Additive log-odds model started at the prior log-odds of ``y``.

    Each round draws ``round(subsample * n)`` rows without replacement and
    ``max(1, floor(colsample_bytree * d))`` features, then fits one tree to
    the gradient ``p - y`` and hessian ``p (1 - p)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    _check_two_classes(y)
    n, d = X.shape
    prior = y.mean()
    base = float(np.log(prior / (1.0 - prior)))
    rng = np.random.default_rng(config.seed)
    n_rows = max(1, int(np.floor(config.subsample * n + 0.5)))
    n_cols = max(1, int(np.floor(config.colsample_bytree * d)))

    margin = np.full(n, base)
    trees, losses = [], [log_loss(y, margin)]
    for _ in range(config.n_estimators):
        p = sigmoid(margin)
        grad = p - y
        hess = p * (1.0 - p)
        rows = np.sort(rng.choice(n, size=n_rows, replace=False)) if n_rows < n else np.arange(n)
        cols = np.sort(rng.choice(d, size=n_cols, replace=False)) if n_cols < d else np.arange(d)
        tree = train_boost_tree(X[rows], grad[rows], hess[rows], max_depth=config.max_depth,
                                reg_lambda=config.reg_lambda, reg_alpha=config.reg_alpha,
                                gamma=config.gamma, min_child_weight=config.min_child_weight,
                                features=cols)
        trees.append(tree)
        margin = margin + config.learning_rate * tree.predict_value(X)
        losses.append(log_loss(y, margin))
    return BoostedTrees(base, config.learning_rate, trees, d, losses)
