"""Canonical data model for news records and corpus-level statistics."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import DataError


class Label(Enum):
    LEGIT = "legit"
    FAKE = "fake"

    @classmethod
    def from_string(cls, raw: str) -> "Label":
        try:
            return cls(raw.strip().lower())
        except ValueError:
            raise MissingLabelError(f"unknown label value: {raw!r}") from None


# Fixed label order used for deterministic iteration and for tie-breaking
# toward FAKE everywhere in the toolkit.
LABEL_ORDER = (Label.FAKE, Label.LEGIT)


class EmptyTextError(DataError):
    pass


class MissingLabelError(DataError):
    pass


class DuplicateIdError(DataError):
    pass


def content_fingerprint(normalized_text: str) -> int:
    """Stable 64-bit hash of normalized text (process-independent)."""
    digest = hashlib.blake2b(normalized_text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass(frozen=True)
class NewsRecord:
    id: str
    text: str
    label: Label
    domain: str | None = None
    source_id: str = ""
    fingerprint: int = 0


def validate_record(candidate: Mapping | NewsRecord, seen_ids: set[str] | None = None) -> NewsRecord:
    """Build a validated NewsRecord from a raw mapping (or re-validate a record).

    Trims text, lowercases the domain tag, derives the content fingerprint,
    and enforces id uniqueness against ``seen_ids`` when given.
    """
    if isinstance(candidate, NewsRecord):
        raw = {
            "id": candidate.id,
            "text": candidate.text,
            "label": candidate.label,
            "domain": candidate.domain,
            "source_id": candidate.source_id,
        }
    else:
        raw = dict(candidate)

    record_id = raw.get("id")
    if record_id is None or str(record_id) == "":
        raise DataError("record is missing an id")
    record_id = str(record_id)

    if seen_ids is not None:
        if record_id in seen_ids:
            raise DuplicateIdError(f"duplicate record id: {record_id!r}")
        seen_ids.add(record_id)

    text = str(raw.get("text") or "").strip()
    if not text:
        raise EmptyTextError(f"record {record_id!r} has empty text")

    label = raw.get("label")
    if label is None or label == "":
        raise MissingLabelError(f"record {record_id!r} has no label")
    if not isinstance(label, Label):
        label = Label.from_string(str(label))

    domain = raw.get("domain")
    domain = str(domain).strip().lower() or None if domain is not None else None

    # Fingerprint is a function of the cleaned, whitespace-collapsed text so
    # that byte-level noise does not defeat exact deduplication.
    from .preprocess import clean_text

    return NewsRecord(
        id=record_id,
        text=text,
        label=label,
        domain=domain,
        source_id=str(raw.get("source_id") or ""),
        fingerprint=content_fingerprint(clean_text(text)),
    )


def validate_corpus(candidates: Iterable[Mapping | NewsRecord]) -> list[NewsRecord]:
    seen: set[str] = set()
    return [validate_record(c, seen) for c in candidates]


@dataclass
class CorpusStats:
    """Corpus-level counts.

    ``unique_words`` sums the per-class vocabulary sizes (a term used by both
    classes counts twice); subtract ``shared_vocabulary`` for the global
    type count.
    """

    total: int
    per_label: dict[str, int]
    per_domain: dict[str, int]
    total_words: int
    unique_words: int
    shared_vocabulary: int
    top_terms: dict[str, list[tuple[str, int]]] = field(default_factory=dict)


def _word_tokens(text: str) -> list[str]:
    # Raw whitespace tokens: corpus totals are reported independently of the
    # modeling-time preprocessing pipeline.
    return text.split()


def top_terms(
    records: Sequence[NewsRecord],
    label: Label,
    k: int,
    stoplist: frozenset[str] | None = None,
) -> list[tuple[str, int]]:
    """The k most frequent stop-word-filtered terms for one class.

    Ties are broken by codepoint order so the ranking is reproducible.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if stoplist is None:
        from .preprocess import default_stoplist

        stoplist = default_stoplist()
    from .preprocess import is_punctuation_token

    counts: Counter[str] = Counter()
    for record in records:
        if record.label is not label:
            continue
        for token in _word_tokens(record.text):
            if token in stoplist or is_punctuation_token(token):
                continue
            counts[token] += 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def compute_stats(
    records: Sequence[NewsRecord],
    stoplist: frozenset[str] | None = None,
    top_k: int = 50,
) -> CorpusStats:
    """Corpus statistics over raw whitespace tokens (pre-stemming)."""
    per_label = {label.value: 0 for label in LABEL_ORDER}
    per_domain: Counter[str] = Counter()
    total_words = 0
    vocab_by_label: dict[Label, set[str]] = {label: set() for label in LABEL_ORDER}

    for record in records:
        per_label[record.label.value] += 1
        per_domain[record.domain or ""] += 1
        tokens = _word_tokens(record.text)
        total_words += len(tokens)
        vocab_by_label[record.label] |= set(tokens)

    shared = vocab_by_label[Label.FAKE] & vocab_by_label[Label.LEGIT]
    return CorpusStats(
        total=len(records),
        per_label=per_label,
        per_domain=dict(sorted(per_domain.items())),
        total_words=total_words,
        unique_words=sum(len(v) for v in vocab_by_label.values()),
        shared_vocabulary=len(shared),
        top_terms={
            label.value: top_terms(records, label, top_k, stoplist)
            for label in LABEL_ORDER
        },
    )


# ---------------------------------------------------------------------------
# Persistence: one JSON object per line, UTF-8, LF endings.

def record_to_json(record: NewsRecord) -> str:
    payload = {
        "id": record.id,
        "text": record.text,
        "label": record.label.value,
        "domain": record.domain,
        "source_id": record.source_id,
    }
    return json.dumps(payload, ensure_ascii=False)


def write_corpus(records: Iterable[NewsRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(record_to_json(record) + "\n")


def read_corpus(path: str | Path) -> list[NewsRecord]:
    records: list[NewsRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8-sig") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            records.append(validate_record(raw, seen))
    return records


def stats_to_json(stats: CorpusStats) -> str:
    payload = {
        "total": stats.total,
        "per_label": stats.per_label,
        "per_domain": stats.per_domain,
        "total_words": stats.total_words,
        "unique_words": stats.unique_words,
        "shared_vocabulary": stats.shared_vocabulary,
        "top_terms": {
            label: [[term, count] for term, count in ranked]
            for label, ranked in stats.top_terms.items()
        },
    }
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2)


def write_top_terms_tsv(ranked: Sequence[tuple[str, int]], path: str | Path) -> None:
    """Two-column TSV (term, frequency) for downstream plotting."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for term, count in ranked:
            fh.write(f"{term}\t{count}\n")
