import itertools
import random

import pytest

from urdufnd import ensemble as ens
from urdufnd.classifiers import Algorithm, Dataset, PredictorOutput, TrainConfig, train
from urdufnd.corpus import Label, validate_corpus
from urdufnd.ensemble import (
    AllPredictorsFailedError,
    NoVotesError,
    Predictor,
    PredictorKind,
    VoteRecord,
    aggregate,
    run_ensemble,
)
from urdufnd.features import FeatureConfig, TextPipeline, Weighting, build_vocabulary
from urdufnd.mock_scorer import MockScorer
from urdufnd.preprocess import PreprocessConfig, preprocess_text
from urdufnd.scorer_bridge import ScorerClient, ScorerEndpoint


def brute_force_majority(outputs: list[PredictorOutput]) -> Label:
    """Independent statement of the voting rule for the oracle check."""
    fake_votes = sum(1 for o in outputs if o.predicted is Label.FAKE)
    legit_votes = len(outputs) - fake_votes
    if fake_votes > legit_votes:
        return Label.FAKE
    if legit_votes > fake_votes:
        return Label.LEGIT
    mean_fake = sum(o.probs[Label.FAKE] for o in outputs) / len(outputs)
    mean_legit = sum(o.probs[Label.LEGIT] for o in outputs) / len(outputs)
    if mean_fake > mean_legit:
        return Label.FAKE
    if mean_legit > mean_fake:
        return Label.LEGIT
    return Label.FAKE


def output(label: Label, confidence: float) -> PredictorOutput:
    p_fake = confidence if label is Label.FAKE else 1.0 - confidence
    return PredictorOutput.from_fake_prob(p_fake)


class TestAggregate:
    def test_strict_majority(self):
        decision, record = aggregate([
            output(Label.FAKE, 0.8), output(Label.FAKE, 0.7), output(Label.LEGIT, 0.9),
        ])
        assert decision is Label.FAKE
        assert record.tie_broken is False
        assert record.tally == {"fake": 2, "legit": 1}

    def test_tie_broken_by_mean_probability(self):
        decision, record = aggregate([output(Label.FAKE, 0.9), output(Label.LEGIT, 0.6)])
        assert decision is Label.FAKE  # mean fake (0.9+0.4)/2 > mean legit
        assert record.tie_broken is True

    def test_residual_tie_goes_to_fake(self):
        # 1-1 vote split and equal mean probabilities on both labels.
        decision, record = aggregate([output(Label.FAKE, 0.7), output(Label.LEGIT, 0.7)])
        assert decision is Label.FAKE
        assert record.tie_broken is True

    def test_empty_outputs(self):
        with pytest.raises(NoVotesError):
            aggregate([])

    def test_exhaustive_three_voter_oracle(self):
        rng = random.Random(13)
        for combo in itertools.product((Label.FAKE, Label.LEGIT), repeat=3):
            outputs = [output(label, 0.5 + rng.random() / 2) for label in combo]
            decision, _ = aggregate(outputs)
            assert decision is brute_force_majority(outputs)

    def test_randomized_oracle_up_to_five_voters(self):
        rng = random.Random(29)
        for _ in range(400):
            n = rng.randint(1, 5)
            outputs = [
                output(rng.choice((Label.FAKE, Label.LEGIT)), 0.5 + rng.random() / 2)
                for _ in range(n)
            ]
            decision, _ = aggregate(outputs)
            assert decision is brute_force_majority(outputs)

    def test_permutation_invariant(self):
        outputs = {
            "a": output(Label.FAKE, 0.9),
            "b": output(Label.LEGIT, 0.8),
            "c": output(Label.LEGIT, 0.55),
        }
        base, _ = aggregate(outputs)
        for names in itertools.permutations(outputs):
            decision, _ = aggregate({n: outputs[n] for n in names})
            assert decision is base

    def test_identical_outputs_any_count(self):
        for n in (1, 2, 5):
            decision, _ = aggregate([output(Label.LEGIT, 0.7)] * n)
            assert decision is Label.LEGIT

    def test_strict_majority_ignores_probabilities(self):
        outputs = [
            output(Label.LEGIT, 0.51), output(Label.LEGIT, 0.52), output(Label.FAKE, 0.99),
        ]
        decision, _ = aggregate(outputs)
        assert decision is Label.LEGIT

    def test_vote_record_round_trip(self):
        _, record = aggregate({"m": output(Label.FAKE, 0.8)}, item_id="x1")
        loaded = VoteRecord.from_json(record.to_json())
        assert loaded == record


# ---------------------------------------------------------------------------

FAKE_WORD, LEGIT_WORD = "جھوٹا", "سچا"


def corpus_fixture(n=12):
    rows = []
    for i in range(n):
        fake = i % 2 == 0
        word = FAKE_WORD if fake else LEGIT_WORD
        rows.append({
            "id": f"r{i}", "text": f"{word} متن{i} خبر", "label": "fake" if fake else "legit",
        })
    return validate_corpus(rows)


def pipeline_for(records):
    pp = PreprocessConfig()
    config = FeatureConfig(word_ngram_range=(1, 1), min_df=1, weighting=Weighting.COUNTS)
    tokens = [preprocess_text(r.text, pp) for r in records]
    vocabulary = build_vocabulary(tokens, config)
    return TextPipeline(pp, vocabulary, config)


def trained_predictor(pid, records, pipeline, algorithm=Algorithm.NAIVE_BAYES):
    dataset = Dataset(
        vectors=[pipeline.vectorize(r.text) for r in records],
        labels=[r.label for r in records],
        dimension=pipeline.dimension,
        vocabulary_hash=pipeline.vocabulary.hash(),
    )
    model = train(dataset, TrainConfig(algorithm, seed=1))
    return Predictor(pid, PredictorKind.IN_PROCESS_MODEL, model)


class TestRunEnsemble:
    def test_single_predictor_identity(self):
        records = corpus_fixture()
        pipeline = pipeline_for(records)
        predictor = trained_predictor("nb", records, pipeline)
        votes = run_ensemble([predictor], records, pipeline)
        assert [v.decision for v in votes] == [r.label for r in records]
        assert all(v.item_id == r.id for v, r in zip(votes, records))

    def test_two_of_three_correct_forces_perfect_ensemble(self):
        records = corpus_fixture()
        pipeline = pipeline_for(records)
        good_a = trained_predictor("a", records, pipeline)
        good_b = trained_predictor("b", records, pipeline, Algorithm.KNN)
        # The contrarian always votes FAKE with certainty.
        contrarian = Predictor("c", PredictorKind.IN_PROCESS_MODEL,
                               train(Dataset([pipeline.vectorize("x")],
                                             [Label.FAKE], pipeline.dimension),
                                     TrainConfig(Algorithm.NAIVE_BAYES)))
        votes = run_ensemble([good_a, good_b, contrarian], records, pipeline)
        correct = sum(v.decision is r.label for v, r in zip(votes, records))
        assert correct == len(records)

    def test_scorer_failure_excludes_only_that_vote(self):
        records = corpus_fixture(4)
        pipeline = pipeline_for(records)
        good = trained_predictor("nb", records, pipeline)
        with MockScorer() as server:
            server.faults.append({"mode": "drop"})
            server.faults.append({"mode": "drop"})  # retry also dropped
            client = ScorerClient(ScorerEndpoint(server.address, timeout_ms=300))
            flaky = Predictor("scorer", PredictorKind.EXTERNAL_SCORER, client)
            votes = run_ensemble([good, flaky], records, pipeline)
            client.close()
        assert len(votes) == len(records)
        assert all("scorer" not in v.outputs for v in votes)
        assert [v.decision for v in votes] == [r.label for r in records]

    def test_all_predictors_failed(self):
        records = corpus_fixture(2)
        pipeline = pipeline_for(records)
        with MockScorer() as server:
            for _ in range(4):
                server.faults.append({"mode": "drop"})
            client = ScorerClient(ScorerEndpoint(server.address, timeout_ms=200))
            flaky = Predictor("scorer", PredictorKind.EXTERNAL_SCORER, client)
            with pytest.raises(AllPredictorsFailedError):
                run_ensemble([flaky], records, pipeline)
            client.close()

    def test_scorer_receives_cleaned_unstemmed_text(self):
        records = validate_corpus([
            {"id": "1", "text": "خبریں http://x.test تازہ", "label": "fake"},
        ])
        pipeline = pipeline_for(records)
        seen = []

        def scorer(text):
            seen.append(text)
            return (0.4, 0.6)

        with MockScorer(scorer=scorer) as server:
            client = ScorerClient(ScorerEndpoint(server.address, timeout_ms=500))
            predictor = Predictor("s", PredictorKind.EXTERNAL_SCORER, client)
            run_ensemble([predictor], records, pipeline)
            client.close()
        assert seen == ["خبریں تازہ"]  # URL stripped, plural suffix untouched

    def test_duplicate_predictor_ids_rejected(self):
        records = corpus_fixture(2)
        pipeline = pipeline_for(records)
        predictor = trained_predictor("same", records, pipeline)
        with pytest.raises(Exception, match="unique"):
            run_ensemble([predictor, predictor], records, pipeline)

    def test_votes_jsonl_round_trip(self, tmp_path):
        records = corpus_fixture(4)
        pipeline = pipeline_for(records)
        predictor = trained_predictor("nb", records, pipeline)
        votes = run_ensemble([predictor], records, pipeline)
        path = tmp_path / "votes.jsonl"
        ens.write_votes(votes, path)
        assert ens.read_votes(path) == votes
