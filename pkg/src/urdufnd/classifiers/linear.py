"""Logistic regression and linear SVM on one seeded mini-batch optimizer.

Both produce probabilities by logistic squashing of the linear score, which
is monotone in the margin and sufficient for voting.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.special import expit

from .base import TrainConfig


def _minibatch_sgd(X, y, config: TrainConfig, gradient) -> tuple[np.ndarray, float]:
    n, d = X.shape
    rng = np.random.default_rng(config.seed)
    w = np.zeros(d)
    b = 0.0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            grad_w, grad_b = gradient(X[batch], y[batch], w, b)
            w -= config.learning_rate * (grad_w + config.regularization * w)
            b -= config.learning_rate * grad_b
    return w, b


def fit_logistic(X: sparse.csr_matrix, y: np.ndarray, config: TrainConfig):
    def gradient(Xb, yb, w, b):
        error = expit(Xb @ w + b) - yb
        return Xb.T @ error / len(yb), error.mean()

    w, b = _minibatch_sgd(X, y, config, gradient)
    return {"weights": w, "bias": np.array([b])}, {}


def fit_linear_svm(X: sparse.csr_matrix, y: np.ndarray, config: TrainConfig):
    def gradient(Xb, yb, w, b):
        signs = 2.0 * yb - 1.0
        margins = signs * (Xb @ w + b)
        violating = margins < 1.0
        if not violating.any():
            return np.zeros_like(w), 0.0
        grad_w = -(Xb[violating].T @ signs[violating]) / len(yb)
        grad_b = -signs[violating].sum() / len(yb)
        return grad_w, grad_b

    w, b = _minibatch_sgd(X, y, config, gradient)
    return {"weights": w, "bias": np.array([b])}, {}


def predict_proba(params: dict, meta: dict, X: sparse.csr_matrix) -> np.ndarray:
    p_fake = expit(X @ params["weights"] + params["bias"][0])
    return np.column_stack([1.0 - p_fake, p_fake])
