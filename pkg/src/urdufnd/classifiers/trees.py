"""Decision tree (Gini), random forest, and gradient-boosted stumps.

Trees are built on lazily densified feature columns and stored as flat
arrays (feature, threshold, children, leaf class frequencies) so they
serialize into the common model format.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse

from .base import TrainConfig

_NO_FEATURE = -1
_EPS = 1e-12


class _Columns:
    """Dense column views over a sparse matrix, materialized on demand."""

    def __init__(self, X: sparse.csr_matrix):
        self._csc = X.tocsc()
        self._n = X.shape[0]
        self._cols: dict[int, np.ndarray] = {}

    def col(self, feature: int) -> np.ndarray:
        cached = self._cols.get(feature)
        if cached is None:
            start, end = self._csc.indptr[feature], self._csc.indptr[feature + 1]
            cached = np.zeros(self._n)
            cached[self._csc.indices[start:end]] = self._csc.data[start:end]
            self._cols[feature] = cached
        return cached


def _best_split(values: np.ndarray, fake: np.ndarray, min_leaf: int) -> tuple[float, float] | None:
    """Best Gini-decrease threshold for one feature, or None.

    Returns (decrease, threshold); the first position attaining the maximum
    wins, which makes ties resolve toward the smaller threshold.
    """
    n = len(values)
    order = np.argsort(values, kind="mergesort")
    v = values[order]
    f = fake[order]
    left_n = np.arange(1, n, dtype=np.float64)
    boundary = v[:-1] < v[1:]
    valid = boundary & (left_n >= min_leaf) & (n - left_n >= min_leaf)
    if not valid.any():
        return None

    total_f = f.sum()
    left_f = np.cumsum(f)[:-1]
    right_n = n - left_n
    right_f = total_f - left_f
    gini_left = 1.0 - (left_f / left_n) ** 2 - ((left_n - left_f) / left_n) ** 2
    gini_right = 1.0 - (right_f / right_n) ** 2 - ((right_n - right_f) / right_n) ** 2
    parent = 1.0 - (total_f / n) ** 2 - ((n - total_f) / n) ** 2
    decrease = parent - (left_n * gini_left + right_n * gini_right) / n
    decrease[~valid] = -np.inf
    best = int(np.argmax(decrease))
    if decrease[best] <= _EPS:
        return None
    return float(decrease[best]), float((v[best] + v[best + 1]) / 2.0)


class _TreeBuilder:
    def __init__(self, columns: _Columns, y: np.ndarray, config: TrainConfig,
                 rng: np.random.Generator | None, n_candidates: int | None):
        self.columns = columns
        self.y = y
        self.config = config
        self.rng = rng
        self.n_candidates = n_candidates
        self.d = columns._csc.shape[1]
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[tuple[float, float]] = []

    def _candidates(self) -> np.ndarray:
        if self.n_candidates is None or self.n_candidates >= self.d:
            return np.arange(self.d)
        picked = self.rng.choice(self.d, size=self.n_candidates, replace=False)
        return np.sort(picked)

    def build(self, idx: np.ndarray, depth: int) -> int:
        node = len(self.feature)
        y_node = self.y[idx]
        n = len(idx)
        n_fake = float(y_node.sum())
        self.feature.append(_NO_FEATURE)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(((n - n_fake) / n, n_fake / n))

        if depth >= self.config.max_depth or n < 2 * self.config.min_leaf \
                or n_fake == 0 or n_fake == n:
            return node

        best = None  # (decrease, feature, threshold); first feature wins ties
        for f in self._candidates():
            split = _best_split(self.columns.col(f)[idx], y_node, self.config.min_leaf)
            if split is not None and (best is None or split[0] > best[0]):
                best = (split[0], int(f), split[1])
        if best is None:
            return node

        _, f, thr = best
        mask = self.columns.col(f)[idx] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.build(idx[mask], depth + 1)
        self.right[node] = self.build(idx[~mask], depth + 1)
        return node

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "feature": np.array(self.feature, dtype=np.int32),
            "threshold": np.array(self.threshold),
            "left": np.array(self.left, dtype=np.int32),
            "right": np.array(self.right, dtype=np.int32),
            "value": np.array(self.value),
        }


def _tree_predict(params: dict[str, np.ndarray], columns: _Columns, n: int) -> np.ndarray:
    out = np.empty((n, 2))
    stack = [(0, np.arange(n))]
    feature, threshold = params["feature"], params["threshold"]
    left, right, value = params["left"], params["right"], params["value"]
    while stack:
        node, idx = stack.pop()
        if len(idx) == 0:
            continue
        if feature[node] == _NO_FEATURE:
            out[idx] = value[node]
            continue
        mask = columns.col(int(feature[node]))[idx] <= threshold[node]
        stack.append((int(left[node]), idx[mask]))
        stack.append((int(right[node]), idx[~mask]))
    return out


# --- Decision tree -----------------------------------------------------------

def fit_decision_tree(X: sparse.csr_matrix, y: np.ndarray, config: TrainConfig):
    builder = _TreeBuilder(_Columns(X), y, config, rng=None, n_candidates=None)
    builder.build(np.arange(X.shape[0]), depth=0)
    return builder.arrays(), {}


def predict_proba_tree(params: dict, meta: dict, X: sparse.csr_matrix) -> np.ndarray:
    return _tree_predict(params, _Columns(X), X.shape[0])


# --- Random forest -----------------------------------------------------------

def fit_random_forest(X: sparse.csr_matrix, y: np.ndarray, config: TrainConfig):
    n, d = X.shape
    columns = _Columns(X)
    if config.feature_subsample == "sqrt":
        n_candidates = max(1, int(math.sqrt(d)))
    elif config.feature_subsample is None:
        n_candidates = None
    else:
        raise ValueError(f"unknown feature_subsample: {config.feature_subsample!r}")

    trees: list[dict[str, np.ndarray]] = []
    for t in range(config.n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, t]))
        idx = rng.integers(0, n, n) if config.bootstrap else np.arange(n)
        builder = _TreeBuilder(columns, y, config, rng=rng, n_candidates=n_candidates)
        builder.build(idx, depth=0)
        trees.append(builder.arrays())

    sizes = np.array([len(tree["feature"]) for tree in trees], dtype=np.int64)
    params = {
        "tree_sizes": sizes,
        "feature": np.concatenate([t["feature"] for t in trees]),
        "threshold": np.concatenate([t["threshold"] for t in trees]),
        "left": np.concatenate([t["left"] for t in trees]),
        "right": np.concatenate([t["right"] for t in trees]),
        "value": np.concatenate([t["value"] for t in trees]),
    }
    return params, {}


def predict_proba_forest(params: dict, meta: dict, X: sparse.csr_matrix) -> np.ndarray:
    columns = _Columns(X)
    n = X.shape[0]
    sizes = params["tree_sizes"]
    total = np.zeros((n, 2))
    offset = 0
    for size in sizes:
        tree = {
            "feature": params["feature"][offset : offset + size],
            "threshold": params["threshold"][offset : offset + size],
            "left": params["left"][offset : offset + size],
            "right": params["right"][offset : offset + size],
            "value": params["value"][offset : offset + size],
        }
        total += _tree_predict(tree, columns, n)
        offset += size
    return total / len(sizes)


# --- Gradient-boosted stumps --------------------------------------------------

class _SortedColumns:
    """Per-feature sort orders, computed once and reused every round."""

    def __init__(self, X: sparse.csr_matrix):
        self._columns = _Columns(X)
        self._orders: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self.d = X.shape[1]

    def sorted_col(self, feature: int):
        cached = self._orders.get(feature)
        if cached is None:
            col = self._columns.col(feature)
            order = np.argsort(col, kind="mergesort")
            v = col[order]
            boundary = v[:-1] < v[1:]
            cached = (order, v, boundary)
            self._orders[feature] = cached
        return cached

    def col(self, feature: int) -> np.ndarray:
        return self._columns.col(feature)


def _best_stump(sorted_columns: _SortedColumns, g: np.ndarray, h: np.ndarray):
    """Maximize the second-order gain G_L^2/H_L + G_R^2/H_R - G^2/H."""
    G, H = g.sum(), h.sum()
    base = G * G / (H + _EPS)
    best = None
    for f in range(sorted_columns.d):
        order, v, boundary = sorted_columns.sorted_col(f)
        if not boundary.any():
            continue
        cg = np.cumsum(g[order])[:-1]
        ch = np.cumsum(h[order])[:-1]
        gain = cg * cg / (ch + _EPS) + (G - cg) ** 2 / (H - ch + _EPS) - base
        gain[~boundary] = -np.inf
        i = int(np.argmax(gain))
        if gain[i] > _EPS and (best is None or gain[i] > best[0]):
            threshold = (v[i] + v[i + 1]) / 2.0
            left = cg[i], ch[i]
            right = G - cg[i], H - ch[i]
            best = (float(gain[i]), f, float(threshold), left, right)
    return best


def fit_gradient_boosting(X: sparse.csr_matrix, y: np.ndarray, config: TrainConfig):
    n = X.shape[0]
    sorted_columns = _SortedColumns(X)
    p0 = min(max(y.mean(), 1e-12), 1 - 1e-12)
    f0 = math.log(p0 / (1 - p0))
    scores = np.full(n, f0)

    feature = np.empty(config.boosting_rounds, dtype=np.int32)
    threshold = np.empty(config.boosting_rounds)
    gamma = np.empty((config.boosting_rounds, 2))
    losses = []
    for r in range(config.boosting_rounds):
        p = 1.0 / (1.0 + np.exp(-scores))
        p = np.clip(p, 1e-12, 1 - 1e-12)
        losses.append(float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))))
        g = y - p
        h = p * (1 - p)
        stump = _best_stump(sorted_columns, g, h)
        if stump is None:
            value = g.sum() / (h.sum() + _EPS)
            feature[r] = _NO_FEATURE
            threshold[r] = 0.0
            gamma[r] = (value, value)
            scores += config.shrinkage * value
            continue
        _, f, thr, (gl, hl), (gr, hr) = stump
        value_left = gl / (hl + _EPS)
        value_right = gr / (hr + _EPS)
        feature[r] = f
        threshold[r] = thr
        gamma[r] = (value_left, value_right)
        mask = sorted_columns.col(f) <= thr
        scores += config.shrinkage * np.where(mask, value_left, value_right)

    params = {"feature": feature, "threshold": threshold, "gamma": gamma}
    meta = {"f0": f0, "shrinkage": config.shrinkage, "train_loss": losses}
    return params, meta


def predict_proba_boosting(params: dict, meta: dict, X: sparse.csr_matrix) -> np.ndarray:
    columns = _Columns(X)
    n = X.shape[0]
    scores = np.full(n, float(meta["f0"]))
    shrinkage = float(meta.get("shrinkage", 0.1))
    for f, thr, (value_left, value_right) in zip(
        params["feature"], params["threshold"], params["gamma"]
    ):
        if f == _NO_FEATURE:
            scores += shrinkage * value_left
        else:
            mask = columns.col(int(f)) <= thr
            scores += shrinkage * np.where(mask, value_left, value_right)
    p_fake = 1.0 / (1.0 + np.exp(-scores))
    return np.column_stack([1.0 - p_fake, p_fake])
