"""Multinomial naive Bayes with Laplace smoothing, in log space throughout."""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from ..errors import DataError
from .base import TrainConfig, labels_to_y


def fit(X: sparse.csr_matrix, y: np.ndarray, config: TrainConfig):
    if X.data.size and X.data.min() < 0:
        raise DataError("multinomial naive Bayes requires non-negative features")
    n, d = X.shape
    class_count = np.array([(y == 0).sum(), (y == 1).sum()], dtype=np.float64)
    class_log_prior = np.log(class_count / n)

    counts = np.zeros((2, d))
    for column, mask in enumerate((y == 0, y == 1)):
        if mask.any():
            counts[column] = np.asarray(X[mask].sum(axis=0)).ravel()
    # Laplace alpha=1 over the full feature space.
    feature_log_prob = np.log(counts + 1.0) - np.log(
        counts.sum(axis=1, keepdims=True) + d
    )
    params = {
        "class_log_prior": class_log_prior,
        "feature_log_prob": feature_log_prob,
    }
    return params, {}


def predict_proba(params: dict, meta: dict, X: sparse.csr_matrix) -> np.ndarray:
    joint = X @ params["feature_log_prob"].T + params["class_log_prior"]
    log_posterior = joint - logsumexp(joint, axis=1, keepdims=True)
    return np.exp(log_posterior)
