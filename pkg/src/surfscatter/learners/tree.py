"""Binary decision trees: weighted-Gini CART and second-order boosting trees.

Both builders share :class:`Tree`, a flat array representation (node 0 is
the root; ``feature == -1`` marks a leaf). Candidate thresholds are the
midpoints between consecutive distinct sorted values and rows with
``x <= threshold`` go left, so split search depends only on feature order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import DimensionMismatch, EmptyTrainingSet

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray      # int, LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    gain: np.ndarray
    n_samples: np.ndarray
    value: np.ndarray        # (n_nodes, 2) class probabilities or (n_nodes,) leaf weights
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if self.n_nodes else 0

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got shape {X.shape}")
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            active = f != LEAF
            if not active.any():
                return node
            r, n, fa = rows[active], node[active], f[active]
            go_left = X[r, fa] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "gain": self.gain.tolist(),
            "n_samples": self.n_samples.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=float),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            gain=np.asarray(d["gain"], dtype=float),
            n_samples=np.asarray(d["n_samples"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=float),
            n_features=int(d["n_features"]),
        )


class _Builder:
    def __init__(self, n_features):
        self.n_features = n_features
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.gain, self.n_samples, self.value = [], [], []

    def add(self, n, value) -> int:
        self.feature.append(LEAF)
        self.threshold.append(np.nan)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.gain.append(0.0)
        self.n_samples.append(n)
        self.value.append(value)
        return len(self.feature) - 1

    def split(self, node, feature, threshold, gain, left, right):
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.gain[node] = gain
        self.left[node] = left
        self.right[node] = right

    def build(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=float),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            gain=np.asarray(self.gain, dtype=float),
            n_samples=np.asarray(self.n_samples, dtype=np.int64),
            value=np.asarray(self.value, dtype=float),
            n_features=self.n_features,
        )


def _split_positions(xs: np.ndarray, min_leaf: int) -> np.ndarray:
    """Valid cut positions i (left = first i+1 sorted rows)."""
    n = len(xs)
    pos = np.flatnonzero(xs[:-1] < xs[1:])
    return pos[(pos + 1 >= min_leaf) & (n - pos - 1 >= min_leaf)]


@njit(cache=True)
def _gini_search(X, y, w, idx, features, min_leaf):
    """Best weighted-Gini cut over ``features`` for rows ``idx``.

    Returns (gain, feature, threshold); feature is -1 when no cut is valid.
    Ties keep the first candidate (lowest feature, then lowest threshold).
    """
    n = idx.size
    W = 0.0
    W1 = 0.0
    for i in idx:
        W += w[i]
        if y[i] == 1:
            W1 += w[i]
    W0 = W - W1
    parent = (W0 * W0 + W1 * W1) / W
    best_gain = -np.inf
    best_f = -1
    best_thr = np.nan
    vals = np.empty(n)
    for f in features:
        for j in range(n):
            vals[j] = X[idx[j], f]
        order = np.argsort(vals, kind="mergesort")
        cw = 0.0
        c1 = 0.0
        for j in range(n - 1):
            r = idx[order[j]]
            cw += w[r]
            if y[r] == 1:
                c1 += w[r]
            x_here = vals[order[j]]
            x_next = vals[order[j + 1]]
            if not x_here < x_next:
                continue
            if j + 1 < min_leaf or n - j - 1 < min_leaf:
                continue
            c0 = cw - c1
            rw = W - cw
            r1 = W1 - c1
            r0 = rw - r1
            left = (c0 * c0 + c1 * c1) / cw if cw > 0 else 0.0
            right = (r0 * r0 + r1 * r1) / rw if rw > 0 else 0.0
            g = left + right - parent
            if g > best_gain:
                best_gain = g
                best_f = f
                best_thr = 0.5 * (x_here + x_next)
    return best_gain, best_f, best_thr


@njit(cache=True)
def _class_probs(y, w, idx):
    total = 0.0
    w1 = 0.0
    n1 = 0
    for i in idx:
        total += w[i]
        if y[i] == 1:
            w1 += w[i]
            n1 += 1
    p1 = w1 / total if total > 0 else n1 / idx.size
    return [1.0 - p1, p1]


def train_tree(X, y, sample_weights=None, *, max_depth=None, min_samples_split=2, min_samples_leaf=1,
               max_features=None, rng=None) -> Tree:
    """Greedy CART on binary labels with weighted Gini impurity.

    ``max_features`` is the number of features drawn (without replacement)
    at each node. If none of the drawn features admits a valid cut, the
    remaining features are tried in the same random order until one does.
    ``gain`` records the weighted impurity decrease of each split. An impure
    node is split whenever a valid cut exists, even at zero gain.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyTrainingSet("no training rows")
    n, d = X.shape
    w = np.ones(n) if sample_weights is None else np.asarray(sample_weights, dtype=float)
    if np.any(w < 0) or not w.sum() > 0:
        raise ValueError("sample weights must be non-negative with a positive sum")
    rng = np.random.default_rng(rng)
    m = d if max_features is None else max(1, min(int(max_features), d))
    max_depth = np.inf if max_depth is None else max_depth
    min_leaf = max(1, int(min_samples_leaf))

    b = _Builder(d)
    all_rows = np.arange(n)
    root = b.add(n, _class_probs(y, w, all_rows))
    stack = [(root, all_rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        if (depth >= max_depth or len(idx) < min_samples_split or len(idx) < 2 * min_leaf
                or np.all(yn == yn[0])):
            continue
        perm = rng.permutation(d) if m < d else np.arange(d)
        gain, f, thr = _gini_search(X, y, w, idx, np.sort(perm[:m]), min_leaf)
        j = m
        while f < 0 and j < d:
            gain, f, thr = _gini_search(X, y, w, idx, perm[j:j + 1], min_leaf)
            j += 1
        # zero-gain cuts are kept (only negative rounding noise is rejected) so
        # impure nodes like the XOR root still split
        if f < 0 or gain < -1e-12 * w[idx].sum():
            continue
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        left = b.add(len(li), _class_probs(y, w, li))
        right = b.add(len(ri), _class_probs(y, w, ri))
        b.split(node, int(f), float(thr), float(gain), left, right)
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return b.build()


def soft_threshold(g: float, alpha: float) -> float:
    return float(np.sign(g) * max(abs(g) - alpha, 0.0))


def boost_leaf_value(G: float, H: float, reg_lambda: float, reg_alpha: float) -> float:
    """L1-soft-thresholded Newton step ``-T_alpha(G) / (H + lambda)``."""
    denom = H + reg_lambda
    if denom <= 0:
        return 0.0
    return -soft_threshold(G, reg_alpha) / denom


def train_boost_tree(X, grad, hess, *, max_depth=6, reg_lambda=1.0, reg_alpha=0.0, gamma=0.0,
                     min_child_weight=1.0, features=None) -> Tree:
    """Regression tree on first/second-order loss statistics.

    Split gain is ``0.5 * [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma``;
    splits with gain <= 0 or a child hessian sum below ``min_child_weight``
    are rejected. ``value`` holds raw leaf weights (not scaled by the
    learning rate).
    """
    X = np.asarray(X, dtype=float)
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyTrainingSet("no training rows")
    n, d = X.shape
    feats = np.arange(d) if features is None else np.sort(np.asarray(features, dtype=np.int64))
    lam = reg_lambda

    b = _Builder(d)
    root = b.add(n, boost_leaf_value(grad.sum(), hess.sum(), lam, reg_alpha))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or len(idx) < 2:
            continue
        gn, hn = grad[idx], hess[idx]
        G, H = gn.sum(), hn.sum()
        parent = G * G / (H + lam) if H + lam > 0 else 0.0
        best = None
        for f in feats:
            order = np.argsort(X[idx, f], kind="stable")
            xs = X[idx[order], f]
            pos = _split_positions(xs, 1)
            if len(pos) == 0:
                continue
            GL = np.cumsum(gn[order])[pos]
            HL = np.cumsum(hn[order])[pos]
            GR, HR = G - GL, H - HL
            ok = (HL >= min_child_weight) & (HR >= min_child_weight)
            if not ok.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                gains = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent) - gamma
            gains = np.where(ok & np.isfinite(gains), gains, -np.inf)
            k = int(np.argmax(gains))
            if best is None or gains[k] > best[0]:
                best = (float(gains[k]), int(f), 0.5 * (xs[pos[k]] + xs[pos[k] + 1]))
        if best is None or not best[0] > 0:
            continue
        gain, f, thr = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        left = b.add(len(li), boost_leaf_value(grad[li].sum(), hess[li].sum(), lam, reg_alpha))
        right = b.add(len(ri), boost_leaf_value(grad[ri].sum(), hess[ri].sum(), lam, reg_alpha))
        b.split(node, f, thr, gain, left, right)
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return b.build()
