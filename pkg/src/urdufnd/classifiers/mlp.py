"""One-hidden-layer perceptron: ReLU, softmax output, mini-batch backprop.

``loss_and_gradients`` is the single source of truth for the loss surface;
the training loop consumes its gradients and tests can difference its loss.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .base import TrainConfig

PARAM_NAMES = ("W1", "b1", "W2", "b2")


def init_params(dimension: int, hidden: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {
        "W1": rng.normal(0.0, np.sqrt(2.0 / dimension), size=(dimension, hidden)),
        "b1": np.zeros(hidden),
        "W2": rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, 2)),
        "b2": np.zeros(2),
    }


def _forward(params: dict, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pre_hidden = X @ params["W1"] + params["b1"]
    hidden = np.maximum(pre_hidden, 0.0)
    logits = hidden @ params["W2"] + params["b2"]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return pre_hidden, hidden, probs


def loss_and_gradients(params: dict, X, y: np.ndarray):
    """Mean cross-entropy over the batch and its gradient for every parameter.

    ``y`` holds class column indices (0 = legit, 1 = fake).
    """
    m = X.shape[0]
    classes = y.astype(int)
    pre_hidden, hidden, probs = _forward(params, X)
    loss = float(-np.mean(np.log(probs[np.arange(m), classes] + 1e-300)))

    d_logits = probs.copy()
    d_logits[np.arange(m), classes] -= 1.0
    d_logits /= m
    grads = {
        "W2": hidden.T @ d_logits,
        "b2": d_logits.sum(axis=0),
    }
    d_hidden = d_logits @ params["W2"].T
    d_pre = d_hidden * (pre_hidden > 0.0)
    grads["W1"] = (X.T @ d_pre) if not sparse.issparse(X) else np.asarray(X.T @ d_pre)
    grads["b1"] = d_pre.sum(axis=0)
    return loss, grads


def fit(X: sparse.csr_matrix, y: np.ndarray, config: TrainConfig):
    n, d = X.shape
    params = init_params(d, config.hidden_units, config.seed)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grads = loss_and_gradients(params, X[batch], y[batch])
            for name in PARAM_NAMES:
                params[name] = params[name] - config.learning_rate * grads[name]
    return params, {"hidden_units": config.hidden_units}


def predict_proba(params: dict, meta: dict, X: sparse.csr_matrix) -> np.ndarray:
    _, _, probs = _forward(params, X)
    return probs
