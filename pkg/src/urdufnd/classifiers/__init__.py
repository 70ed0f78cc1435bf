"""Eight classical learners behind one train/predict/save/load surface."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..corpus import Label
from ..features import FeatureVector
from . import knn, linear, mlp, naive_bayes, trees
from .base import (  # noqa: F401
    Algorithm,
    Dataset,
    LABEL_COLUMNS,
    MODEL_FORMAT_VERSION,
    NonFiniteFeatureError,
    PredictorOutput,
    TrainConfig,
    TrainedModel,
    VocabularyMismatchError,
    check_finite,
    labels_to_y,
    to_csr,
)
from .io import CorruptModelError, VersionMismatchError, load_model, save_model  # noqa: F401

log = logging.getLogger(__name__)

_FITTERS = {
    Algorithm.NAIVE_BAYES: naive_bayes.fit,
    Algorithm.LOGISTIC_REGRESSION: linear.fit_logistic,
    Algorithm.LINEAR_SVM: linear.fit_linear_svm,
    Algorithm.DECISION_TREE: trees.fit_decision_tree,
    Algorithm.RANDOM_FOREST: trees.fit_random_forest,
    Algorithm.GRADIENT_BOOSTING: trees.fit_gradient_boosting,
    Algorithm.KNN: knn.fit,
    Algorithm.MLP: mlp.fit,
}

_PREDICTORS = {
    Algorithm.NAIVE_BAYES: naive_bayes.predict_proba,
    Algorithm.LOGISTIC_REGRESSION: linear.predict_proba,
    Algorithm.LINEAR_SVM: linear.predict_proba,
    Algorithm.DECISION_TREE: trees.predict_proba_tree,
    Algorithm.RANDOM_FOREST: trees.predict_proba_forest,
    Algorithm.GRADIENT_BOOSTING: trees.predict_proba_boosting,
    Algorithm.KNN: knn.predict_proba,
    Algorithm.MLP: mlp.predict_proba,
}


def train(dataset: Dataset, config: TrainConfig) -> TrainedModel:
    """Train one model; deterministic given the config seed."""
    X = to_csr(dataset.vectors, dataset.dimension)
    check_finite(X)
    y = labels_to_y(dataset.labels)
    meta = {
        "dimension": dataset.dimension,
        "config": config.to_dict(),
        "degenerate": None,
    }

    distinct = set(dataset.labels)
    if len(distinct) == 1:
        only = next(iter(distinct))
        log.warning("training data is single-class (%s); model is flagged degenerate",
                    only.value)
        meta["degenerate"] = only.value
        return TrainedModel(config.algorithm, {}, meta, dataset.vocabulary_hash)

    params, extra = _FITTERS[config.algorithm](X, y, config)
    meta.update(extra)
    return TrainedModel(config.algorithm, params, meta, dataset.vocabulary_hash)


def predict_proba_matrix(model: TrainedModel, vectors: Sequence[FeatureVector]) -> np.ndarray:
    """(n, 2) class probabilities in LABEL_COLUMNS order."""
    if model.degenerate:
        column = 1 if model.meta["degenerate"] == Label.FAKE.value else 0
        probs = np.zeros((len(vectors), 2))
        probs[:, column] = 1.0
        return probs
    X = to_csr(vectors, model.dimension)
    check_finite(X)
    return _PREDICTORS[model.algorithm](model.params, model.meta, X)


def _check_space(model: TrainedModel, vectors: Sequence[FeatureVector],
                 vocabulary_hash: str | None) -> None:
    if vocabulary_hash is not None and model.vocabulary_hash \
            and vocabulary_hash != model.vocabulary_hash:
        raise VocabularyMismatchError(
            "vector feature space does not match the model's vocabulary hash"
        )
    for vector in vectors:
        if vector.entries and max(vector.entries) >= model.dimension:
            raise VocabularyMismatchError(
                f"feature id {max(vector.entries)} out of range for model "
                f"dimension {model.dimension}"
            )


def predict(model: TrainedModel, vector: FeatureVector,
            vocabulary_hash: str | None = None) -> PredictorOutput:
    return predict_batch(model, [vector], vocabulary_hash)[0]


def predict_batch(model: TrainedModel, vectors: Sequence[FeatureVector],
                  vocabulary_hash: str | None = None) -> list[PredictorOutput]:
    _check_space(model, vectors, vocabulary_hash)
    probs = predict_proba_matrix(model, vectors)
    return [PredictorOutput.from_probs(row[0], row[1]) for row in probs]
