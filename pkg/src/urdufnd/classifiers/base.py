"""Shared types for the classical learners: datasets, outputs, trained models."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import sparse

from ..corpus import Label
from ..errors import DataError
from ..features import FeatureVector

MODEL_FORMAT_VERSION = "1.0.0"

# Column order of every (n, 2) probability array in this subpackage.
LABEL_COLUMNS = (Label.LEGIT, Label.FAKE)


class NonFiniteFeatureError(DataError):
    pass


class VocabularyMismatchError(DataError):
    pass


class Algorithm(Enum):
    KNN = "knn"
    LINEAR_SVM = "svm"
    DECISION_TREE = "dt"
    RANDOM_FOREST = "rf"
    LOGISTIC_REGRESSION = "lr"
    NAIVE_BAYES = "nb"
    GRADIENT_BOOSTING = "gb"
    MLP = "mlp"


@dataclass
class TrainConfig:
    algorithm: Algorithm
    seed: int = 0
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.01
    regularization: float = 1e-4
    k_neighbors: int = 5
    max_depth: int = 20
    min_leaf: int = 2
    n_trees: int = 100
    bootstrap: bool = True
    feature_subsample: str | None = "sqrt"  # None: consider every feature
    boosting_rounds: int = 200
    shrinkage: float = 0.1
    hidden_units: int = 128

    def __post_init__(self):
        if isinstance(self.algorithm, str):
            self.algorithm = Algorithm(self.algorithm)
        for name in ("epochs", "batch_size", "k_neighbors", "max_depth", "min_leaf",
                     "n_trees", "boosting_rounds", "hidden_units"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def to_dict(self) -> dict:
        payload = self.__dict__.copy()
        payload["algorithm"] = self.algorithm.value
        return payload


@dataclass
class Dataset:
    vectors: Sequence[FeatureVector]
    labels: Sequence[Label]
    dimension: int
    vocabulary_hash: str = ""

    def __post_init__(self):
        if len(self.vectors) != len(self.labels) or len(self.vectors) == 0:
            raise DataError("dataset needs >= 1 example with one label per vector")
        for vector in self.vectors:
            if vector.entries and max(vector.entries) >= self.dimension:
                raise DataError(
                    f"feature id {max(vector.entries)} out of range for "
                    f"dimension {self.dimension}"
                )


@dataclass(frozen=True)
class PredictorOutput:
    probs: dict[Label, float]
    predicted: Label

    @classmethod
    def from_fake_prob(cls, p_fake: float) -> "PredictorOutput":
        p_fake = float(p_fake)
        probs = {Label.LEGIT: 1.0 - p_fake, Label.FAKE: p_fake}
        return cls(probs, argmax_label(probs))

    @classmethod
    def from_probs(cls, p_legit: float, p_fake: float) -> "PredictorOutput":
        probs = {Label.LEGIT: float(p_legit), Label.FAKE: float(p_fake)}
        return cls(probs, argmax_label(probs))


def argmax_label(probs: dict[Label, float]) -> Label:
    # Ties break toward FAKE: flagging is the conservative call here.
    return Label.FAKE if probs[Label.FAKE] >= probs[Label.LEGIT] else Label.LEGIT


@dataclass
class TrainedModel:
    algorithm: Algorithm
    params: dict[str, np.ndarray]
    meta: dict
    vocabulary_hash: str = ""
    version: str = MODEL_FORMAT_VERSION

    @property
    def dimension(self) -> int:
        return int(self.meta["dimension"])

    @property
    def degenerate(self) -> bool:
        return self.meta.get("degenerate") is not None


def to_csr(vectors: Sequence[FeatureVector], dimension: int) -> sparse.csr_matrix:
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    for vector in vectors:
        for tid in sorted(vector.entries):
            indices.append(tid)
            data.append(vector.entries[tid])
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int32),
         np.array(indptr, dtype=np.int64)),
        shape=(len(vectors), dimension),
    )


def check_finite(X: sparse.csr_matrix) -> None:
    if X.data.size and not np.isfinite(X.data).all():
        raise NonFiniteFeatureError("feature matrix contains NaN or infinite values")


def labels_to_y(labels: Sequence[Label]) -> np.ndarray:
    """1.0 for FAKE, 0.0 for LEGIT."""
    return np.array([1.0 if label is Label.FAKE else 0.0 for label in labels])
