"""k-nearest-neighbors over cosine similarity on the stored training set."""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .base import TrainConfig


def fit(X: sparse.csr_matrix, y: np.ndarray, config: TrainConfig):
    row_norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    params = {
        "data": X.data.astype(np.float64),
        "indices": X.indices.astype(np.int32),
        "indptr": X.indptr.astype(np.int64),
        "row_norms": row_norms,
        "y": y.astype(np.float64),
    }
    return params, {"k": config.k_neighbors}


def _train_matrix(params: dict, dimension: int) -> sparse.csr_matrix:
    return sparse.csr_matrix(
        (params["data"], params["indices"], params["indptr"]),
        shape=(len(params["y"]), dimension),
    )


def predict_proba(params: dict, meta: dict, X: sparse.csr_matrix) -> np.ndarray:
    train = _train_matrix(params, X.shape[1])
    y = params["y"]
    n_train = len(y)
    k = min(int(meta["k"]), n_train)

    dots = (X @ train.T).toarray()
    train_norms = np.where(params["row_norms"] > 0, params["row_norms"], 1.0)
    query_norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    query_norms = np.where(query_norms > 0, query_norms, 1.0)
    sims = dots / (query_norms[:, None] * train_norms[None, :])

    out = np.empty((X.shape[0], 2))
    for i in range(X.shape[0]):
        # Stable ranking: descending similarity, ascending training index.
        order = np.lexsort((np.arange(n_train), -sims[i]))
        p_fake = y[order[:k]].mean()
        out[i] = (1.0 - p_fake, p_fake)
    return out
