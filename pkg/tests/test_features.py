import math

import pytest

from urdufnd import features
from urdufnd.features import (
    EmptyCorpusError,
    FeatureConfig,
    FeatureVector,
    Vocabulary,
    Weighting,
    build_vocabulary,
    feature_dimension,
    lexical_stats,
    sentiment_score,
    vectorize,
)

UNIGRAMS = FeatureConfig(word_ngram_range=(1, 1), min_df=1, weighting=Weighting.TFIDF)
COUNTS = FeatureConfig(word_ngram_range=(1, 1), min_df=1, weighting=Weighting.COUNTS)


def brute_force_tfidf(docs: list[list[str]]) -> list[dict[str, float]]:
    """Independent oracle: explicit loops, no shared code with the package."""
    terms = sorted({t for doc in docs for t in doc})
    n_docs = len(docs)
    doc_freq = {}
    for term in terms:
        count = 0
        for doc in docs:
            present = False
            for token in doc:
                if token == term:
                    present = True
            if present:
                count += 1
        doc_freq[term] = count

    matrix = []
    for doc in docs:
        weights = {}
        for term in terms:
            tf = 0
            for token in doc:
                if token == term:
                    tf += 1
            if tf == 0:
                continue
            idf = math.log((1 + n_docs) / (1 + doc_freq[term])) + 1.0
            weights[term] = tf * idf
        norm = math.sqrt(sum(w * w for w in weights.values()))
        if norm > 0:
            weights = {t: w / norm for t, w in weights.items()}
        matrix.append(weights)
    return matrix


class TestBuildVocabulary:
    def test_hand_counted(self):
        vocab = build_vocabulary([["الف", "ب"], ["الف", "ج"]], UNIGRAMS)
        assert set(vocab.term_to_id) == {"الف", "ب", "ج"}
        df = {term: vocab.doc_freq[vocab.term_to_id[term]] for term in vocab.term_to_id}
        assert df == {"الف": 2, "ب": 1, "ج": 1}
        assert vocab.n_docs == 2

    def test_min_df_threshold(self):
        config = FeatureConfig(word_ngram_range=(1, 1), min_df=2)
        vocab = build_vocabulary([["الف", "ب"], ["الف", "ج"]], config)
        assert set(vocab.term_to_id) == {"الف"}

    def test_max_features_cap(self):
        config = FeatureConfig(word_ngram_range=(1, 1), min_df=1, max_features=1)
        vocab = build_vocabulary([["الف", "ب"], ["الف", "ج"]], config)
        assert set(vocab.term_to_id) == {"الف"}

    def test_ids_dense_from_one_in_sorted_order(self):
        vocab = build_vocabulary([["ج", "الف", "ب"]], UNIGRAMS)
        ordered = sorted(vocab.term_to_id, key=lambda t: vocab.term_to_id[t])
        assert ordered == sorted(vocab.term_to_id)
        assert sorted(vocab.term_to_id.values()) == [1, 2, 3]

    def test_word_bigrams_and_char_ngrams(self):
        config = FeatureConfig(word_ngram_range=(1, 2), char_ngram_range=(2, 2), min_df=1)
        vocab = build_vocabulary([["اب", "پت"]], config)
        assert "اب_پت" in vocab.term_to_id
        assert "#اب" in vocab.term_to_id and "#پت" in vocab.term_to_id

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpusError):
            build_vocabulary([], UNIGRAMS)

    def test_tsv_round_trip(self, tmp_path):
        vocab = build_vocabulary([["الف", "ب"], ["الف"]], UNIGRAMS)
        path = tmp_path / "vocab.tsv"
        vocab.save_tsv(path)
        loaded = Vocabulary.load_tsv(path)
        assert loaded.term_to_id == vocab.term_to_id
        assert loaded.doc_freq == vocab.doc_freq
        assert loaded.n_docs == vocab.n_docs
        assert loaded.hash() == vocab.hash()


class TestVectorize:
    def test_empty_document(self):
        vocab = build_vocabulary([["الف"]], UNIGRAMS)
        vector = vectorize([], vocab, UNIGRAMS)
        assert vector.entries == {}
        assert vector.norm == 0.0

    def test_idf_of_ubiquitous_term_is_one(self):
        docs = [["الف"], ["الف"], ["الف"]]
        vocab = build_vocabulary(docs, UNIGRAMS)
        assert vocab.idf(vocab.term_to_id["الف"]) == pytest.approx(1.0, abs=1e-15)

    def test_counts_mode(self):
        vocab = build_vocabulary([["الف", "الف", "ب"]], COUNTS)
        vector = vectorize(["الف", "الف", "ب"], vocab, COUNTS)
        by_term = {term: vector.entries[tid] for term, tid in vocab.term_to_id.items()}
        assert by_term == {"الف": 2.0, "ب": 1.0}

    def test_oov_ignored(self):
        vocab = build_vocabulary([["الف"]], UNIGRAMS)
        vector = vectorize(["نامعلوم"], vocab, UNIGRAMS)
        assert vector.entries == {}

    def test_matches_brute_force_oracle(self):
        docs = [
            ["خبر", "تازہ", "خبر"],
            ["تازہ", "ملک"],
            ["خبر", "ملک", "ملک", "دن"],
        ]
        vocab = build_vocabulary(docs, UNIGRAMS)
        expected = brute_force_tfidf(docs)
        for doc, want in zip(docs, expected):
            vector = vectorize(doc, vocab, UNIGRAMS)
            got = {term: vector.entries.get(vocab.term_to_id[term], 0.0)
                   for term in vocab.term_to_id}
            for term in vocab.term_to_id:
                assert got[term] == pytest.approx(want.get(term, 0.0), abs=1e-9)

    def test_tfidf_norm_is_one_or_zero(self):
        docs = [["الف", "ب"], ["الف", "ج", "ج"], ["د"]]
        vocab = build_vocabulary(docs, UNIGRAMS)
        for doc in docs + [[]]:
            vector = vectorize(doc, vocab, UNIGRAMS)
            assert vector.norm == pytest.approx(1.0, abs=1e-12) or vector.norm == 0.0

    def test_counts_sum_reproduces_corpus_frequency(self):
        docs = [["الف", "ب", "الف"], ["ب"], ["الف", "ج"]]
        vocab = build_vocabulary(docs, COUNTS)
        totals = {}
        for doc in docs:
            vector = vectorize(doc, vocab, COUNTS)
            for tid, weight in vector.entries.items():
                totals[tid] = totals.get(tid, 0) + weight
        brute = {}
        for doc in docs:
            for token in doc:
                tid = vocab.term_to_id[token]
                brute[tid] = brute.get(tid, 0) + 1
        assert totals == brute

    def test_no_stored_zero_weights(self):
        vector = FeatureVector.from_entries({1: 0.0, 2: 3.0})
        assert vector.entries == {2: 3.0}
        assert vector.norm == pytest.approx(3.0)


class TestDenseBlock:
    def test_sentiment_score_arithmetic(self):
        lexicon = {"اچھا": 1, "برا": -1}
        assert sentiment_score([], lexicon) == 0.0
        assert sentiment_score(["اچھا", "اچھا", "برا"], lexicon) == pytest.approx(1 / 3)
        assert sentiment_score(["اچھا"], lexicon) == 1.0

    def test_lexical_stats_hand_counts(self):
        assert lexical_stats([]) == [0.0, 0.0, 0.0, 0.0, 0.0]
        stats = lexical_stats(["الف", "الف", "ب"])
        assert stats[0] == 3.0
        assert stats[2] == pytest.approx(2 / 3)
        stats = lexical_stats(["چارر"])
        assert stats[1] == 4.0 and stats[2] == 1.0

    def test_reserved_trailing_ids(self):
        config = FeatureConfig(
            word_ngram_range=(1, 1), min_df=1,
            include_sentiment=True, include_lexical_stats=True,
        )
        vocab = build_vocabulary([["الف"]], config)
        assert feature_dimension(vocab, config) == vocab.size + 1 + 5 + 1
        vector = vectorize(["الف", "الف"], vocab, config, {"الف": 1})
        base = vocab.size + 1
        assert vector.entries[base] == 2.0  # token count
        assert vector.entries[base + 5] == 1.0  # sentiment

    def test_dimension_without_extras(self):
        vocab = build_vocabulary([["الف"]], UNIGRAMS)
        assert feature_dimension(vocab, UNIGRAMS) == vocab.size + 1


class TestConfigValidation:
    def test_bad_word_range(self):
        with pytest.raises(ValueError):
            FeatureConfig(word_ngram_range=(2, 1))
        with pytest.raises(ValueError):
            FeatureConfig(word_ngram_range=(1, 4))

    def test_bad_char_range(self):
        with pytest.raises(ValueError):
            FeatureConfig(char_ngram_range=(1, 3))

    def test_bad_min_df(self):
        with pytest.raises(ValueError):
            FeatureConfig(min_df=0)

    def test_hash_stable(self):
        assert FeatureConfig().hash() == FeatureConfig().hash()
        assert FeatureConfig().hash() != FeatureConfig(min_df=3).hash()


class TestEncodingAndLexicon:
    def test_encode_decode_round_trip_for_in_vocab_tokens(self):
        from urdufnd.preprocess import encode

        vocab = build_vocabulary([["الف", "ب", "ج"]], UNIGRAMS)
        tokens = ["ب", "الف", "ج"]
        assert vocab.decode(encode(tokens, vocab)) == tokens
        assert encode(["نامعلوم"], vocab) == [0]
        assert vocab.decode([0]) == ["<unk>"]

    def test_sentiment_lexicon_file_format(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("اچھا\t+1\nبرا\t-1\n", encoding="utf-8")
        assert features.load_sentiment_lexicon(path) == {"اچھا": 1, "برا": -1}

    def test_shipped_lexicon_loads(self):
        lexicon = features.default_sentiment_lexicon()
        assert len(lexicon) >= 30
        assert set(lexicon.values()) == {1, -1}

    def test_bad_polarity_rejected(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("لفظ\t2\n", encoding="utf-8")
        with pytest.raises(Exception, match="polarity"):
            features.load_sentiment_lexicon(path)
