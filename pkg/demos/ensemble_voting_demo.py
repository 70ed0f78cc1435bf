#!/usr/bin/env python3
"""Majority voting across two in-process models and one external scorer
speaking the wire protocol (a mock stands in for a transformer service).

Run:  python demos/ensemble_voting_demo.py
"""

import random

from urdufnd.classifiers import Algorithm, Dataset, TrainConfig, train
from urdufnd.corpus import Label, NewsRecord
from urdufnd.ensemble import Predictor, PredictorKind, run_ensemble
from urdufnd.features import FeatureConfig, TextPipeline, Weighting, build_vocabulary
from urdufnd.mock_scorer import MockScorer
from urdufnd.preprocess import PreprocessConfig, preprocess_text
from urdufnd.scorer_bridge import ScorerClient, ScorerEndpoint

rng = random.Random(11)
FAKE_MARK, LEGIT_MARK = "جھوٹا", "سچا"

records = []
for i in range(60):
    fake = i % 2 == 0
    mark = FAKE_MARK if fake else LEGIT_MARK
    records.append(NewsRecord(id=f"n{i}", text=f"{mark} خبر نمبر{i}",
                              label=Label.FAKE if fake else Label.LEGIT))

pp = PreprocessConfig()
fc = FeatureConfig(word_ngram_range=(1, 1), min_df=1, weighting=Weighting.COUNTS)
tokens = [preprocess_text(r.text, pp) for r in records]
vocabulary = build_vocabulary(tokens, fc)
pipeline = TextPipeline(pp, vocabulary, fc)

dataset = Dataset(
    vectors=[pipeline.vectorize(r.text) for r in records],
    labels=[r.label for r in records],
    dimension=pipeline.dimension,
    vocabulary_hash=vocabulary.hash(),
)
nb = train(dataset, TrainConfig(Algorithm.NAIVE_BAYES, seed=1))
knn = train(dataset, TrainConfig(Algorithm.KNN, seed=1))


def keyword_scorer(text: str):
    """Stands in for a fine-tuned transformer behind the same protocol."""
    p_fake = 0.9 if FAKE_MARK in text else 0.1
    return (1 - p_fake, p_fake)


with MockScorer(scorer=keyword_scorer, model_name="demo-transformer") as server:
    client = ScorerClient(ScorerEndpoint(server.address, timeout_ms=2000))
    predictors = [
        Predictor("nb", PredictorKind.IN_PROCESS_MODEL, nb),
        Predictor("knn", PredictorKind.IN_PROCESS_MODEL, knn),
        Predictor("scorer", PredictorKind.EXTERNAL_SCORER, client),
    ]
    votes = run_ensemble(predictors, records, pipeline)
    client.close()

correct = sum(v.decision is r.label for v, r in zip(votes, records))
ties = sum(v.tie_broken for v in votes)
print(f"ensemble decided {correct}/{len(records)} correctly, {ties} tie-breaks")
sample = votes[0]
print(f"first item tally: {sample.tally} -> {sample.decision.value}")
for pid, output in sample.outputs.items():
    print(f"  {pid:7s} voted {output.predicted.value} "
          f"(fake prob {output.probs[Label.FAKE]:.2f})")
