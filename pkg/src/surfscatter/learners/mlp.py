"""Feed-forward ReLU network with dropout, softmax output and Adam training."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import NonStandardizedInput
from .forest import _check_two_classes


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple[int, ...] = (64, 32)
    dropout: float = 0.3
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-7
    batch_size: int = 32
    validation_fraction: float = 0.15
    patience: int = 20
    max_epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in [0, 1)")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer widths must be positive")


def init_params(n_in: int, hidden, n_out: int, rng) -> list[np.ndarray]:
    """He-normal weights, zero biases. Returns ``[W1, b1, W2, b2, ...]``."""
    sizes = [n_in, *hidden, n_out]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        params.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params, X, masks=None):
    """Returns (probabilities, cache). ``masks[i]`` multiplies hidden layer i
    (already inverse-scaled); ``None`` disables dropout."""
    acts = [X]
    pre = []
    h = X
    n_layers = len(params) // 2
    for i in range(n_layers - 1):
        z = h @ params[2 * i] + params[2 * i + 1]
        pre.append(z)
        h = np.maximum(z, 0.0)
        if masks is not None:
            h = h * masks[i]
        acts.append(h)
    logits = h @ params[-2] + params[-1]
    return softmax(logits), (acts, pre)


def cross_entropy(probs, y) -> float:
    return float(-np.mean(np.log(np.clip(probs[np.arange(len(y)), y], 1e-300, None))))


def loss_and_gradients(params, X, y, masks=None):
    """Mean categorical cross-entropy and its gradient w.r.t. every parameter."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    probs, (acts, pre) = forward(params, X, masks)
    loss = cross_entropy(probs, y)
    delta = probs.copy()
    delta[np.arange(len(y)), y] -= 1.0
    delta /= len(y)
    grads = [None] * len(params)
    n_layers = len(params) // 2
    for i in reversed(range(n_layers)):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params[2 * i].T
            if masks is not None:
                delta = delta * masks[i - 1]
            delta = delta * (pre[i - 1] > 0)
    return loss, grads


@dataclass
class Mlp:
    params: list[np.ndarray]
    n_features: int
    epochs_trained: int = 0
    best_val_loss: float = float("nan")

    def predict_proba(self, X) -> np.ndarray:
        probs, _ = forward(self.params, np.asarray(X, dtype=float))
        return probs


def _dropout_masks(params, batch, rate, rng):
    if rate <= 0:
        return None
    keep = 1.0 - rate
    return [(rng.random((batch, params[2 * i].shape[1])) < keep) / keep for i in range(len(params) // 2 - 1)]


def train_mlp(X, y, config: MlpConfig = MlpConfig()) -> Mlp:
    """Mini-batch Adam on standardized rows, with early stopping.

    A seeded ``validation_fraction`` of rows is held out; training stops
    after ``patience`` epochs without a lower validation loss and the
    best-validation weights are restored.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    _check_two_classes(y)
    col_means = X.mean(axis=0)
    if np.any(np.abs(col_means) > 3):
        warnings.warn(f"network inputs do not look standardized (column means {col_means})",
                      NonStandardizedInput, stacklevel=2)
    rng = np.random.default_rng(config.seed)
    n, d = X.shape
    params = init_params(d, config.hidden, 2, rng)

    n_val = int(round(config.validation_fraction * n)) if n >= 2 else 0
    n_val = min(max(n_val, 1 if config.validation_fraction > 0 and n >= 2 else 0), n - 1)
    perm = rng.permutation(n)
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    Xt, yt = X[tr_idx], y[tr_idx]
    Xv, yv = X[val_idx], y[val_idx]

    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, lr, eps = config.beta1, config.beta2, config.learning_rate, config.adam_epsilon
    step = 0
    best_loss, best_params, since_best = np.inf, [p.copy() for p in params], 0
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(Xt))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            masks = _dropout_masks(params, len(batch), config.dropout, rng)
            _, grads = loss_and_gradients(params, Xt[batch], yt[batch], masks)
            step += 1
            corr1 = 1.0 - b1 ** step
            corr2 = 1.0 - b2 ** step
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= b1
                mi += (1 - b1) * g
                vi *= b2
                vi += (1 - b2) * g * g
                p -= lr * (mi / corr1) / (np.sqrt(vi / corr2) + eps)
        if n_val == 0:
            continue
        val_loss = cross_entropy(forward(params, Xv)[0], yv)
        if val_loss < best_loss:
            best_loss, best_params, since_best = val_loss, [p.copy() for p in params], 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    if n_val == 0:
        best_params = params
    return Mlp(best_params, d, epoch, float(best_loss) if n_val else float("nan"))
