#!/usr/bin/env python3
"""Train every classical learner on one synthetic corpus and render the
comparison table.

Run:  python demos/classifier_comparison_demo.py
"""

import random

from urdufnd import harmonize as hz
from urdufnd.classifiers import Algorithm, Dataset, TrainConfig, predict_batch, train
from urdufnd.corpus import Label, NewsRecord
from urdufnd.evaluate import confusion, metrics, render_report_table
from urdufnd.features import (
    FeatureConfig, Weighting, build_vocabulary, feature_dimension, vectorize,
)
from urdufnd.preprocess import PreprocessConfig, preprocess_text

rng = random.Random(5)
LETTERS = "ابپتٹثجچحخدڈرزسشصطعغفقکگلمنوہیے"
word = lambda: "".join(rng.choice(LETTERS) for _ in range(rng.randint(3, 7)))

fake_core = [word() for _ in range(40)]
legit_core = [word() for _ in range(40)]
shared = [word() for _ in range(30)]

records = []
for i in range(1200):
    fake = i % 2 == 0
    words = [rng.choice(fake_core if fake else legit_core) for _ in range(9)]
    words += [rng.choice(shared) for _ in range(4)]
    rng.shuffle(words)
    records.append(NewsRecord(id=f"r{i}", text=" ".join(words),
                              label=Label.FAKE if fake else Label.LEGIT))

split = hz.stratified_split(records, 0.8, seed=1)
train_records, test_records = hz.split_records(records, split)

pp = PreprocessConfig()
fc = FeatureConfig(word_ngram_range=(1, 1), min_df=2, weighting=Weighting.TFIDF)
train_tokens = [preprocess_text(r.text, pp) for r in train_records]
vocabulary = build_vocabulary(train_tokens, fc)
dataset = Dataset(
    vectors=[vectorize(t, vocabulary, fc) for t in train_tokens],
    labels=[r.label for r in train_records],
    dimension=feature_dimension(vocabulary, fc),
    vocabulary_hash=vocabulary.hash(),
)
test_vectors = [vectorize(preprocess_text(r.text, pp), vocabulary, fc)
                for r in test_records]
gold = [r.label for r in test_records]

reports = {}
for algorithm in Algorithm:
    model = train(dataset, TrainConfig(algorithm, seed=9))
    outputs = predict_batch(model, test_vectors)
    matrix = confusion([o.predicted for o in outputs], gold)
    reports[algorithm.value.upper()] = metrics(matrix, model_id=algorithm.value)

print(render_report_table(reports))
