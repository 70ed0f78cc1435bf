"""Lexical, sentiment, n-gram, bag-of-words, and TF-IDF feature extraction."""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataError
from . import preprocess

UNK_ID = 0


class EmptyCorpusError(DataError):
    pass


class Weighting(Enum):
    COUNTS = "counts"
    TFIDF = "tfidf"


@dataclass(frozen=True)
class FeatureConfig:
    word_ngram_range: tuple[int, int] = (1, 2)
    char_ngram_range: tuple[int, int] | None = None
    min_df: int = 2
    max_features: int | None = 50000
    weighting: Weighting = Weighting.TFIDF
    include_sentiment: bool = False
    include_lexical_stats: bool = False

    def __post_init__(self):
        lo, hi = self.word_ngram_range
        if not (1 <= lo <= hi <= 3):
            raise ValueError(f"word_ngram_range out of bounds: {self.word_ngram_range}")
        if self.char_ngram_range is not None:
            clo, chi = self.char_ngram_range
            if not (2 <= clo <= chi <= 5):
                raise ValueError(f"char_ngram_range out of bounds: {self.char_ngram_range}")
        if self.min_df < 1:
            raise ValueError("min_df must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1 when set")

    def to_dict(self) -> dict:
        return {
            "word_ngram_range": list(self.word_ngram_range),
            "char_ngram_range": list(self.char_ngram_range) if self.char_ngram_range else None,
            "min_df": self.min_df,
            "max_features": self.max_features,
            "weighting": self.weighting.value,
            "include_sentiment": self.include_sentiment,
            "include_lexical_stats": self.include_lexical_stats,
        }

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def extract_terms(tokens: Sequence[str], config: FeatureConfig) -> list[str]:
    """All countable terms for one document: word n-grams joined with '_',
    char n-grams (within tokens) marked with a '#' prefix."""
    terms: list[str] = []
    lo, hi = config.word_ngram_range
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            terms.append("_".join(tokens[i : i + n]))
    if config.char_ngram_range is not None:
        clo, chi = config.char_ngram_range
        for token in tokens:
            for n in range(clo, chi + 1):
                for i in range(len(token) - n + 1):
                    terms.append("#" + token[i : i + n])
    return terms


@dataclass
class Vocabulary:
    """Term table with dense ids (0 reserved for UNK) and document frequencies."""

    term_to_id: dict[str, int]
    doc_freq: dict[int, int]
    n_docs: int
    config_hash: str = ""

    def __post_init__(self):
        self._id_to_term = {i: t for t, i in self.term_to_id.items()}

    @property
    def size(self) -> int:
        return len(self.term_to_id)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self._id_to_term.get(i, "<unk>") for i in ids]

    def idf(self, term_id: int) -> float:
        return math.log((1 + self.n_docs) / (1 + self.doc_freq.get(term_id, 0))) + 1.0

    def hash(self) -> str:
        payload = json.dumps(
            {
                "terms": sorted(self.term_to_id.items()),
                "doc_freq": sorted(self.doc_freq.items()),
                "n_docs": self.n_docs,
                "config": self.config_hash,
            },
            ensure_ascii=False,
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def save_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            header = {"n_docs": self.n_docs, "config_hash": self.config_hash}
            fh.write("#" + json.dumps(header, sort_keys=True) + "\n")
            for term in sorted(self.term_to_id, key=lambda t: self.term_to_id[t]):
                tid = self.term_to_id[term]
                fh.write(f"{term}\t{tid}\t{self.doc_freq.get(tid, 0)}\n")

    @classmethod
    def load_tsv(cls, path: str | Path) -> "Vocabulary":
        term_to_id: dict[str, int] = {}
        doc_freq: dict[int, int] = {}
        n_docs = 0
        config_hash = ""
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
            if first.startswith("#"):
                header = json.loads(first[1:])
                n_docs = int(header.get("n_docs", 0))
                config_hash = header.get("config_hash", "")
            else:
                fh.seek(0)
            for line in fh:
                if not line.strip():
                    continue
                term, tid, df = line.rstrip("\n").split("\t")
                term_to_id[term] = int(tid)
                doc_freq[int(tid)] = int(df)
        return cls(term_to_id, doc_freq, n_docs, config_hash)


def build_vocabulary(
    token_sequences: Iterable[Sequence[str]], config: FeatureConfig
) -> Vocabulary:
    """Build the term table over a corpus of token sequences.

    Terms below ``min_df`` document frequency are dropped; ``max_features``
    keeps the highest-total-frequency terms (ties by codepoint order); ids
    are then assigned in sorted term order starting at 1.
    """
    doc_freq: Counter[str] = Counter()
    total_freq: Counter[str] = Counter()
    n_docs = 0
    for tokens in token_sequences:
        n_docs += 1
        terms = extract_terms(list(tokens), config)
        total_freq.update(terms)
        doc_freq.update(set(terms))
    if n_docs == 0:
        raise EmptyCorpusError("cannot build a vocabulary from zero documents")

    kept = [t for t, df in doc_freq.items() if df >= config.min_df]
    if config.max_features is not None and len(kept) > config.max_features:
        kept.sort(key=lambda t: (-total_freq[t], t))
        kept = kept[: config.max_features]

    kept.sort()
    term_to_id = {term: i + 1 for i, term in enumerate(kept)}
    freq_by_id = {term_to_id[t]: doc_freq[t] for t in kept}
    return Vocabulary(term_to_id, freq_by_id, n_docs, config.hash())


@dataclass(frozen=True)
class FeatureVector:
    entries: dict[int, float]
    norm: float

    @classmethod
    def from_entries(cls, entries: Mapping[int, float]) -> "FeatureVector":
        nonzero = {i: float(w) for i, w in entries.items() if w != 0.0}
        norm = math.sqrt(sum(w * w for w in nonzero.values()))
        return cls(nonzero, norm)


def feature_dimension(vocabulary: Vocabulary, config: FeatureConfig) -> int:
    """Sparse ids 0..V plus the reserved dense block when enabled."""
    dim = vocabulary.size + 1
    if config.include_lexical_stats:
        dim += 5
    if config.include_sentiment:
        dim += 1
    return dim


def sentiment_score(tokens: Sequence[str], lexicon: Mapping[str, int]) -> float:
    """(positive hits - negative hits) / max(1, total hits), in [-1, 1]."""
    positive = sum(1 for t in tokens if lexicon.get(t) == 1)
    negative = sum(1 for t in tokens if lexicon.get(t) == -1)
    return (positive - negative) / max(1, positive + negative)


def lexical_stats(tokens: Sequence[str]) -> list[float]:
    """[token count, mean token length, type/token ratio, punctuation count,
    digit-token count]; all zeros for an empty sequence."""
    if not tokens:
        return [0.0, 0.0, 0.0, 0.0, 0.0]
    n = len(tokens)
    return [
        float(n),
        sum(len(t) for t in tokens) / n,
        len(set(tokens)) / n,
        float(sum(1 for t in tokens if preprocess.is_punctuation_token(t))),
        float(sum(1 for t in tokens if t.isdigit())),
    ]


def vectorize(
    tokens: Sequence[str],
    vocabulary: Vocabulary,
    config: FeatureConfig,
    lexicon: Mapping[str, int] | None = None,
) -> FeatureVector:
    """One document to a sparse feature vector; OOV terms are ignored.

    Counts mode stores raw term counts. TfIdf mode stores tf(t,d) * idf(t)
    with idf(t) = ln((1+n_docs)/(1+doc_freq(t))) + 1, L2-normalized over the
    sparse block. The dense lexical/sentiment block, when enabled, is
    appended unnormalized at the reserved trailing ids.
    """
    tokens = list(tokens)
    counts: Counter[int] = Counter()
    for term in extract_terms(tokens, config):
        tid = vocabulary.term_to_id.get(term)
        if tid is not None:
            counts[tid] += 1

    entries: dict[int, float] = {}
    if config.weighting is Weighting.COUNTS:
        entries.update({tid: float(c) for tid, c in counts.items()})
    else:
        weights = {tid: c * vocabulary.idf(tid) for tid, c in counts.items()}
        norm = math.sqrt(sum(w * w for w in weights.values()))
        if norm > 0:
            entries.update({tid: w / norm for tid, w in weights.items()})

    base = vocabulary.size + 1
    if config.include_lexical_stats:
        for offset, value in enumerate(lexical_stats(tokens)):
            if value != 0.0:
                entries[base + offset] = value
        base += 5
    if config.include_sentiment:
        score = sentiment_score(tokens, lexicon or {})
        if score != 0.0:
            entries[base] = score

    return FeatureVector.from_entries(entries)


def load_sentiment_lexicon_text(text: str) -> dict[str, int]:
    lexicon: dict[str, int] = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        term, _, polarity = line.partition("\t")
        value = int(polarity.strip())
        if value not in (1, -1):
            raise DataError(f"sentiment polarity must be +1 or -1: {line!r}")
        lexicon[term.strip()] = value
    return lexicon


def load_sentiment_lexicon(path: str | Path) -> dict[str, int]:
    return load_sentiment_lexicon_text(Path(path).read_text("utf-8"))


def default_sentiment_lexicon() -> dict[str, int]:
    from importlib import resources

    return load_sentiment_lexicon_text(
        resources.files("urdufnd.data").joinpath("sentiment_ur.tsv").read_text("utf-8")
    )


@dataclass
class TextPipeline:
    """Preprocessing plus vectorization bundle shared by training and scoring.

    External scorers receive ``clean()`` output (cleaned but unstemmed text);
    in-process models consume ``vectorize()`` output.
    """

    preprocess_config: preprocess.PreprocessConfig
    vocabulary: Vocabulary
    feature_config: FeatureConfig
    lexicon: Mapping[str, int] | None = None

    def clean(self, text: str) -> str:
        return preprocess.clean_text(text, self.preprocess_config)

    def tokens(self, text: str) -> preprocess.TokenSequence:
        return preprocess.preprocess_text(text, self.preprocess_config)

    def vectorize(self, text: str) -> FeatureVector:
        return vectorize(self.tokens(text), self.vocabulary, self.feature_config, self.lexicon)

    @property
    def dimension(self) -> int:
        return feature_dimension(self.vocabulary, self.feature_config)
