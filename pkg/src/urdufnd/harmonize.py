"""Turn heterogeneous raw sources into one clean, deduplicated, split corpus."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.etree import ElementTree

from .corpus import Label, NewsRecord, validate_corpus, validate_record
from .errors import DataError
from . import preprocess

log = logging.getLogger(__name__)

DROP = "drop"

# Shipped default raw-label mapping: partial-truth categories count as fake,
# verified categories as legit. "true" deliberately maps to legit; manifests
# that send verified-sounding labels to fake are flagged for review.
DEFAULT_LABEL_MAP: dict[str, str] = {
    "fake": "fake",
    "false": "fake",
    "fabricated": "fake",
    "hoax": "fake",
    "satire": "fake",
    "partly true": "fake",
    "half true": "fake",
    "mostly false": "fake",
    "pants-on-fire": "fake",
    "pants on fire": "fake",
    "unreal": "fake",
    "real": "legit",
    "legit": "legit",
    "legitimate": "legit",
    "true": "legit",
    "genuine": "legit",
    "authentic": "legit",
}

_VERIFIED_SOUNDING = {"true", "real", "legit", "legitimate", "genuine", "authentic"}


class SourceFormat(Enum):
    DELIMITED_TABLE = "delimited_table"
    TREE_STRUCTURED = "tree_structured"
    MARKUP = "markup"


class ParseError(DataError):
    """Malformed payload; message carries the line or path location."""


class UnmappedLabelError(DataError):
    pass


class FieldMissingError(DataError):
    pass


class CountMismatchError(DataError):
    pass


@dataclass
class SourceManifest:
    source_id: str
    url: str = ""
    format: SourceFormat = SourceFormat.DELIMITED_TABLE
    field_map: dict[str, str] = field(default_factory=dict)
    label_map: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_LABEL_MAP))
    expected_counts: dict[str, int] | None = None
    record_path: str | None = None  # tree/markup: path to the record list

    def __post_init__(self):
        missing = {"text", "label"} - set(self.field_map)
        if missing:
            raise DataError(
                f"manifest {self.source_id!r}: field_map must cover {sorted(missing)}"
            )
        for raw, mapped in self.label_map.items():
            if mapped not in ("fake", "legit", DROP):
                raise DataError(
                    f"manifest {self.source_id!r}: label_map[{raw!r}] must be "
                    f"'fake', 'legit', or '{DROP}'"
                )
        for raw in review_label_map(self.label_map):
            log.warning(
                "manifest %r maps verified-sounding label %r to fake; review the manifest",
                self.source_id,
                raw,
            )

    @classmethod
    def from_json(cls, payload: Mapping) -> "SourceManifest":
        return cls(
            source_id=str(payload["source_id"]),
            url=str(payload.get("url", "")),
            format=SourceFormat(payload.get("format", "delimited_table")),
            field_map=dict(payload.get("field_map", {})),
            label_map={
                str(k).strip().lower(): str(v).strip().lower()
                for k, v in payload.get("label_map", DEFAULT_LABEL_MAP).items()
            },
            expected_counts=payload.get("expected_counts"),
            record_path=payload.get("record_path"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "SourceManifest":
        return cls.from_json(json.loads(Path(path).read_text("utf-8-sig")))


def review_label_map(label_map: Mapping[str, str]) -> list[str]:
    """Raw labels that look verified but are mapped to fake (needs human review)."""
    return sorted(
        raw for raw, mapped in label_map.items()
        if raw in _VERIFIED_SOUNDING and mapped == "fake"
    )


def normalize_labels(raw: str, label_map: Mapping[str, str]) -> Label | None:
    """Map a raw label string to a Label, or None for declared drops."""
    key = raw.strip().lower()
    mapped = label_map.get(key)
    if mapped is None:
        raise UnmappedLabelError(f"raw label {raw!r} is not covered by the label map")
    if mapped == DROP:
        return None
    return Label(mapped)


@dataclass
class IngestResult:
    records: list[NewsRecord]
    dropped: int = 0


def _walk_path(obj, path: str):
    current = obj
    for part in path.split("/"):
        if part == "":
            continue
        if isinstance(current, Mapping) and part in current:
            current = current[part]
        elif isinstance(current, list) and part.isdigit() and int(part) < len(current):
            current = current[int(part)]
        else:
            return None
    return current


def _decode(payload: bytes) -> str:
    try:
        return payload.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"payload is not valid UTF-8: {exc}") from None


def _rows_from_delimited(text: str, manifest: SourceManifest):
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{manifest.source_id}: empty delimited payload") from None
    except csv.Error as exc:
        raise ParseError(f"{manifest.source_id}: line 1: {exc}") from None
    columns = {name.strip(): i for i, name in enumerate(header)}
    indices = {}
    for canonical, column in manifest.field_map.items():
        if column not in columns:
            raise FieldMissingError(
                f"{manifest.source_id}: column {column!r} not in header {header}"
            )
        indices[canonical] = columns[column]
    try:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            values = {}
            for canonical, idx in indices.items():
                if idx >= len(row):
                    raise FieldMissingError(
                        f"{manifest.source_id}: line {lineno}: row has no column "
                        f"{manifest.field_map[canonical]!r}"
                    )
                values[canonical] = row[idx]
            yield lineno, values
    except csv.Error as exc:
        raise ParseError(f"{manifest.source_id}: {exc}") from None


def _rows_from_tree(text: str, manifest: SourceManifest):
    stripped = text.strip()
    items = None
    try:
        document = json.loads(stripped)
        parsed = True
    except json.JSONDecodeError:
        parsed = False
    if parsed:
        target = document
        if manifest.record_path:
            target = _walk_path(document, manifest.record_path)
            if not isinstance(target, list):
                raise ParseError(
                    f"{manifest.source_id}: path {manifest.record_path!r} "
                    "does not resolve to a record list"
                )
        if isinstance(target, list):
            items = list(enumerate(target, start=1))
        elif isinstance(target, Mapping):
            items = [(1, target)]
        else:
            raise ParseError(f"{manifest.source_id}: document is not a record list")
    if items is None:
        # Line-oriented JSON: one object per line.
        items = []
        for lineno, line in enumerate(stripped.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                items.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{manifest.source_id}: line {lineno}: {exc}") from None
    for position, item in items:
        values = {}
        for canonical, path in manifest.field_map.items():
            value = _walk_path(item, path)
            if value is None and canonical in ("text", "label"):
                raise FieldMissingError(
                    f"{manifest.source_id}: record {position}: missing field path {path!r}"
                )
            values[canonical] = value
        yield position, values


def _rows_from_markup(text: str, manifest: SourceManifest):
    try:
        root = ElementTree.fromstring(text)
    except ElementTree.ParseError as exc:
        raise ParseError(f"{manifest.source_id}: {exc}") from None
    elements = root.findall(manifest.record_path) if manifest.record_path else list(root)
    for position, element in enumerate(elements, start=1):
        values = {}
        for canonical, path in manifest.field_map.items():
            child = element.find(path)
            if child is None or child.text is None:
                if canonical in ("text", "label"):
                    raise FieldMissingError(
                        f"{manifest.source_id}: record {position}: missing element {path!r}"
                    )
                values[canonical] = None
            else:
                values[canonical] = child.text
        yield position, values


_ROW_READERS = {
    SourceFormat.DELIMITED_TABLE: _rows_from_delimited,
    SourceFormat.TREE_STRUCTURED: _rows_from_tree,
    SourceFormat.MARKUP: _rows_from_markup,
}


def ingest_source(manifest: SourceManifest, payload: bytes) -> IngestResult:
    """Parse one raw source into validated records with normalized labels.

    Rows whose raw label maps to "drop" are excluded and counted. When the
    manifest carries expected_counts, the ingested totals are verified.
    """
    text = _decode(payload)
    records: list[NewsRecord] = []
    seen: set[str] = set()
    dropped = 0
    counter = 0
    for position, values in _ROW_READERS[manifest.format](text, manifest):
        raw_label = values.get("label")
        if raw_label is None:
            raise FieldMissingError(
                f"{manifest.source_id}: record {position}: missing label"
            )
        label = normalize_labels(str(raw_label), manifest.label_map)
        if label is None:
            dropped += 1
            continue
        counter += 1
        record_id = values.get("id")
        record_id = str(record_id) if record_id not in (None, "") else f"{manifest.source_id}-{counter:06d}"
        records.append(
            validate_record(
                {
                    "id": record_id,
                    "text": values.get("text"),
                    "label": label,
                    "domain": values.get("domain"),
                    "source_id": manifest.source_id,
                },
                seen,
            )
        )

    if manifest.expected_counts:
        stats = Counter(r.label for r in records)
        observed = {
            "total": len(records),
            "fake": stats[Label.FAKE],
            "legit": stats[Label.LEGIT],
        }
        for key, expected in manifest.expected_counts.items():
            if observed.get(key) != expected:
                raise CountMismatchError(
                    f"{manifest.source_id}: expected {key}={expected}, got {observed.get(key)}"
                )
    return IngestResult(records, dropped)


# ---------------------------------------------------------------------------
# Deduplication

@dataclass
class DedupCluster:
    kept_id: str
    removed_ids: list[str]
    similarity: float


@dataclass
class DedupReport:
    exact_removed: int = 0
    near_removed: int = 0
    clusters: list[DedupCluster] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "exact_removed": self.exact_removed,
            "near_removed": self.near_removed,
            "clusters": [
                {"kept": c.kept_id, "removed": c.removed_ids, "similarity": c.similarity}
                for c in self.clusters
            ],
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2)


def shingle_set(tokens: Sequence[str], size: int = 5) -> frozenset[tuple[str, ...]]:
    """Word shingles; shorter texts collapse to one whole-text shingle."""
    if not tokens:
        return frozenset()
    if len(tokens) < size:
        return frozenset({tuple(tokens)})
    return frozenset(tuple(tokens[i : i + size]) for i in range(len(tokens) - size + 1))


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


class _MinHashIndex:
    """LSH candidate index over 128-permutation MinHash signatures.

    Candidates are only ever *suggestions*: every pair is verified with the
    exact Jaccard similarity before a removal decision.
    """

    PERMUTATIONS = 128
    BANDS = 16  # 16 bands x 8 rows

    _MERSENNE = (1 << 61) - 1

    def __init__(self, seed: int = 0x5EED):
        rng = random.Random(seed)
        self._a = [rng.randrange(1, self._MERSENNE) for _ in range(self.PERMUTATIONS)]
        self._b = [rng.randrange(0, self._MERSENNE) for _ in range(self.PERMUTATIONS)]
        self._buckets: list[dict[tuple, list[int]]] = [dict() for _ in range(self.BANDS)]

    def signature(self, shingles: frozenset) -> tuple[int, ...]:
        hashes = [
            int.from_bytes(
                hashlib.blake2b("␟".join(s).encode("utf-8"), digest_size=8).digest(),
                "big",
            )
            for s in shingles
        ]
        if not hashes:
            return tuple([0] * self.PERMUTATIONS)
        return tuple(
            min((a * h + b) % self._MERSENNE for h in hashes)
            for a, b in zip(self._a, self._b)
        )

    def candidates(self, signature: tuple[int, ...]) -> set[int]:
        rows = self.PERMUTATIONS // self.BANDS
        found: set[int] = set()
        for band in range(self.BANDS):
            key = signature[band * rows : (band + 1) * rows]
            found.update(self._buckets[band].get(key, ()))
        return found

    def insert(self, index: int, signature: tuple[int, ...]) -> None:
        rows = self.PERMUTATIONS // self.BANDS
        for band in range(self.BANDS):
            key = signature[band * rows : (band + 1) * rows]
            self._buckets[band].setdefault(key, []).append(index)


def deduplicate(
    records: Sequence[NewsRecord],
    shingle_size: int = 5,
    threshold: float = 0.9,
    use_minhash: bool = False,
) -> tuple[list[NewsRecord], DedupReport]:
    """Two-pass dedup: exact normalized-text match, then near-duplicate
    removal at word-shingle Jaccard >= threshold against kept records.

    Keeps the first occurrence in input order. With use_minhash, candidate
    pairs come from an LSH index but are always verified by exact Jaccard.
    """
    report = DedupReport()
    clusters: dict[str, DedupCluster] = {}

    def record_removal(keeper: NewsRecord, removed: NewsRecord, similarity: float):
        cluster = clusters.get(keeper.id)
        if cluster is None:
            cluster = clusters[keeper.id] = DedupCluster(keeper.id, [], similarity)
        cluster.removed_ids.append(removed.id)
        cluster.similarity = min(cluster.similarity, similarity)

    # Exact pass keyed on the cleaned, whitespace-collapsed text.
    survivors: list[tuple[NewsRecord, str]] = []
    by_text: dict[str, NewsRecord] = {}
    for record in records:
        normalized = preprocess.clean_text(record.text)
        keeper = by_text.get(normalized)
        if keeper is not None:
            report.exact_removed += 1
            record_removal(keeper, record, 1.0)
        else:
            by_text[normalized] = record
            survivors.append((record, normalized))

    # Near pass over exact-pass survivors.
    kept: list[NewsRecord] = []
    kept_shingles: list[frozenset] = []
    index = _MinHashIndex() if use_minhash else None
    for record, normalized in survivors:
        shingles = shingle_set(normalized.split(), shingle_size)
        signature = index.signature(shingles) if index is not None else None
        if index is not None:
            candidate_ids = sorted(index.candidates(signature))
        else:
            candidate_ids = range(len(kept))

        match = None
        best = 0.0
        for i in candidate_ids:
            other = kept_shingles[i]
            # Size bound: jaccard <= min(|a|,|b|) / max(|a|,|b|).
            smaller, larger = sorted((len(shingles), len(other)))
            if larger == 0 or smaller / larger < threshold:
                continue
            similarity = jaccard(shingles, other)
            if similarity >= threshold and similarity > best:
                match = i
                best = similarity
        if match is not None:
            report.near_removed += 1
            record_removal(kept[match], record, best)
            # If this record had collected exact duplicates of its own, those
            # removals now belong to the surviving keeper's cluster.
            orphan = clusters.pop(record.id, None)
            if orphan is not None:
                cluster = clusters[kept[match].id]
                cluster.removed_ids.extend(orphan.removed_ids)
                cluster.similarity = min(cluster.similarity, orphan.similarity)
            continue
        if index is not None:
            index.insert(len(kept), signature)
        kept.append(record)
        kept_shingles.append(shingles)

    report.clusters = [clusters[r.id] for r in kept if r.id in clusters]
    return kept, report


# ---------------------------------------------------------------------------
# Domain balancing

@dataclass(frozen=True)
class BalancePolicy:
    max_per_domain: int | None = None
    targets: Mapping[str, int] | None = None

    def cap_for(self, domain: str) -> int | None:
        if self.targets is not None and domain in self.targets:
            return self.targets[domain]
        return self.max_per_domain


def _largest_remainder(counts: dict[Label, int], cap: int) -> dict[Label, int]:
    total = sum(counts.values())
    quotas = {label: Fraction(cap * n, total) for label, n in counts.items()}
    allocation = {label: math.floor(q) for label, q in quotas.items()}
    remaining = cap - sum(allocation.values())
    by_remainder = sorted(
        counts,
        key=lambda label: (-(quotas[label] - allocation[label]), label.value != "fake"),
    )
    for label in by_remainder[:remaining]:
        allocation[label] += 1
    return allocation


def balance_domains(
    records: Sequence[NewsRecord], policy: BalancePolicy, seed: int
) -> list[NewsRecord]:
    """Cap per-domain counts by seeded downsampling, preserving each
    surviving domain's label ratio within one record. Never upsamples."""
    by_domain: dict[str, list[NewsRecord]] = defaultdict(list)
    for record in records:
        by_domain[record.domain or ""].append(record)

    kept_ids: set[str] = set()
    for domain in sorted(by_domain):
        group = by_domain[domain]
        cap = policy.cap_for(domain)
        if cap is None or len(group) <= cap:
            kept_ids.update(r.id for r in group)
            continue
        label_counts = Counter(r.label for r in group)
        allocation = _largest_remainder(dict(label_counts), cap)
        rng = random.Random(f"{seed}|balance|{domain}")
        for label in sorted(label_counts, key=lambda l: l.value):
            members = [r.id for r in group if r.label is label]
            rng.shuffle(members)
            kept_ids.update(members[: allocation.get(label, 0)])
    return [r for r in records if r.id in kept_ids]


# ---------------------------------------------------------------------------
# Stratified split

TRAIN = "train"
TEST = "test"


@dataclass
class SplitSpec:
    seed: int
    train_ratio: float
    assignment: dict[str, str]

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "train_ratio": self.train_ratio,
                "assignment": dict(sorted(self.assignment.items())),
            },
            ensure_ascii=False,
            sort_keys=True,
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "SplitSpec":
        payload = json.loads(text)
        return cls(
            seed=int(payload["seed"]),
            train_ratio=float(payload["train_ratio"]),
            assignment=dict(payload["assignment"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "SplitSpec":
        return cls.from_json(Path(path).read_text("utf-8"))


def stratified_split(
    records: Sequence[NewsRecord], train_ratio: float, seed: int
) -> SplitSpec:
    """Per-label seeded shuffle with train count = ceiling(count * ratio).

    The ceiling is taken over exact decimal arithmetic so a ratio like 0.8
    never gains a spurious extra record from float rounding.
    """
    if not (0 < train_ratio <= 1):
        raise ValueError("train_ratio must be in (0, 1]")
    exact_ratio = Fraction(str(train_ratio))
    assignment: dict[str, str] = {}
    for label in sorted({r.label for r in records}, key=lambda l: l.value):
        ids = [r.id for r in records if r.label is label]
        rng = random.Random(f"{seed}|split|{label.value}")
        rng.shuffle(ids)
        n_train = math.ceil(exact_ratio * len(ids))
        for i, record_id in enumerate(ids):
            assignment[record_id] = TRAIN if i < n_train else TEST
    return SplitSpec(seed=seed, train_ratio=train_ratio, assignment=assignment)


def split_records(
    records: Sequence[NewsRecord], spec: SplitSpec
) -> tuple[list[NewsRecord], list[NewsRecord]]:
    train = [r for r in records if spec.assignment.get(r.id) == TRAIN]
    test = [r for r in records if spec.assignment.get(r.id) == TEST]
    return train, test


# ---------------------------------------------------------------------------
# Fusion

def fuse(
    sources: Sequence[Sequence[NewsRecord]],
    shingle_size: int = 5,
    threshold: float = 0.9,
    use_minhash: bool = False,
) -> tuple[list[NewsRecord], DedupReport]:
    """Concatenate ingested sources, resolve id collisions by prefixing the
    source id, validate, and deduplicate into the canonical corpus."""
    id_sources: dict[str, set[str]] = defaultdict(set)
    for source in sources:
        for record in source:
            id_sources[record.id].add(record.source_id)

    merged: list[NewsRecord] = []
    for source in sources:
        for record in source:
            if len(id_sources[record.id]) > 1:
                record = NewsRecord(
                    id=f"{record.source_id}:{record.id}",
                    text=record.text,
                    label=record.label,
                    domain=record.domain,
                    source_id=record.source_id,
                    fingerprint=record.fingerprint,
                )
            merged.append(record)
    return deduplicate(
        validate_corpus(merged),
        shingle_size=shingle_size,
        threshold=threshold,
        use_minhash=use_minhash,
    )
