"""Urdu-aware text normalization: cleaning, segmentation, stemming, tokenization."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

SENTENCE_PUNCTUATION = "۔؟،.?,"  # ۔ ؟ ، . ? ,
SENTENCE_TERMINATORS = "۔؟.?"  # ۔ ؟ . ?
ZWNJ = "‌"

_URL_RE = re.compile(r"(?:[a-zA-Z][a-zA-Z0-9+.\-]*://\S+|www\.\S+)")
_IP_RE = re.compile(r"\b(?:\d{1,3}\.){3}\d{1,3}\b")
_WS_RE = re.compile(r"\s+")

# Arabic-Indic (U+0660..) and extended Arabic-Indic (U+06F0.., used by Urdu)
# digits are folded to ASCII so numeric variants collapse for dedup/features.
_DIGIT_TABLE = {0x0660 + i: ord("0") + i for i in range(10)}
_DIGIT_TABLE.update({0x06F0 + i: ord("0") + i for i in range(10)})

# Combining marks stripped only when PreprocessConfig.strip_diacritics is set.
_DIACRITICS = "".join(chr(c) for c in range(0x064B, 0x0653)) + "ٰ"

_ARABIC_BLOCKS = (
    (0x0600, 0x06FF),
    (0x0750, 0x077F),
    (0x08A0, 0x08FF),
    (0xFB50, 0xFDFF),
    (0xFE70, 0xFEFF),
)


def _is_arabic(ch: str) -> bool:
    code = ord(ch)
    return any(lo <= code <= hi for lo, hi in _ARABIC_BLOCKS)


def is_punctuation_token(token: str) -> bool:
    return bool(token) and all(ch in SENTENCE_PUNCTUATION for ch in token)


@dataclass(frozen=True)
class PreprocessConfig:
    stoplist: frozenset[str] = field(default_factory=frozenset)
    suffix_table: tuple[tuple[str, str], ...] = ()
    strip_urls: bool = True
    strip_ips: bool = True
    keep_question_mark: bool = True
    strip_diacritics: bool = False

    def __post_init__(self):
        for entry in self.stoplist:
            if not entry or _WS_RE.search(entry):
                raise ValueError(f"stoplist entries must be single tokens: {entry!r}")
        # Longest-suffix-first application order, codepoint order on ties.
        ordered = tuple(sorted(self.suffix_table, key=lambda r: (-len(r[0]), r[0])))
        object.__setattr__(self, "suffix_table", ordered)

    def to_dict(self) -> dict:
        return {
            "stoplist": sorted(self.stoplist),
            "suffix_table": [list(rule) for rule in self.suffix_table],
            "strip_urls": self.strip_urls,
            "strip_ips": self.strip_ips,
            "keep_question_mark": self.keep_question_mark,
            "strip_diacritics": self.strip_diacritics,
        }


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]

    def __post_init__(self):
        for token in self.tokens:
            if not token or _WS_RE.search(token):
                raise ValueError(f"invalid token: {token!r}")

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, index):
        return self.tokens[index]


def _data_text(name: str) -> str:
    return resources.files("urdufnd.data").joinpath(name).read_text("utf-8")


@lru_cache(maxsize=1)
def default_stoplist() -> frozenset[str]:
    return load_stoplist_text(_data_text("stopwords_ur.txt"))


@lru_cache(maxsize=1)
def default_suffix_table() -> tuple[tuple[str, str], ...]:
    return load_suffix_table_text(_data_text("suffixes_ur.tsv"))


def load_stoplist_text(text: str) -> frozenset[str]:
    entries = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line)
    return frozenset(entries)


def load_stoplist(path: str | Path) -> frozenset[str]:
    return load_stoplist_text(Path(path).read_text("utf-8"))


def load_suffix_table_text(text: str) -> tuple[tuple[str, str], ...]:
    rules = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        suffix, _, replacement = line.partition("\t")
        rules.append((suffix.strip(), replacement.strip()))
    return tuple(rules)


def load_suffix_table(path: str | Path) -> tuple[tuple[str, str], ...]:
    return load_suffix_table_text(Path(path).read_text("utf-8"))


def default_config() -> PreprocessConfig:
    return PreprocessConfig(stoplist=default_stoplist(), suffix_table=default_suffix_table())


def clean_text(text: str, config: PreprocessConfig | None = None) -> str:
    """Remove URLs, dotted-quad IPs, and out-of-alphabet symbols; collapse whitespace.

    The retained alphabet is Arabic-script codepoints (letters and marks),
    digits (Arabic-Indic forms folded to ASCII first), sentence punctuation,
    and the zero-width non-joiner, which tokenize() later treats as a break.
    Idempotent.
    """
    if config is None:
        config = _DEFAULT_CLEAN_CONFIG
    if config.strip_urls:
        text = _URL_RE.sub(" ", text)
    text = text.translate(_DIGIT_TABLE)
    if config.strip_ips:
        text = _IP_RE.sub(" ", text)
    if config.strip_diacritics:
        text = text.translate({ord(ch): None for ch in _DIACRITICS})

    kept: list[str] = []
    for ch in text:
        if ch.isspace():
            kept.append(" ")
        elif ch in SENTENCE_PUNCTUATION:
            if ch in "?؟" and not config.keep_question_mark:
                kept.append(" ")
            else:
                kept.append(ch)
        elif ch == ZWNJ or ch.isdigit() and ch.isascii() or _is_arabic(ch):
            kept.append(ch)
        else:
            kept.append(" ")
    return _WS_RE.sub(" ", "".join(kept)).strip()


def segment_sentences(text: str) -> list[str]:
    """Split cleaned text on sentence terminators, keeping them on their sentence.

    Runs of consecutive terminators are absorbed into a single boundary.
    """
    pattern = re.compile(
        "[^{t}]*[{t}]+|[^{t}]+".format(t=re.escape(SENTENCE_TERMINATORS))
    )
    sentences = []
    for match in pattern.findall(text):
        stripped = match.strip()
        if stripped:
            sentences.append(stripped)
    return sentences


_PUNCT_SPLIT_RE = re.compile(
    "[{p}]|[^{p}]+".format(p=re.escape(SENTENCE_PUNCTUATION))
)
_BREAK_RE = re.compile(r"[\s‌]+")


def tokenize(text: str) -> TokenSequence:
    """Split on whitespace and ZWNJ; punctuation marks become their own tokens."""
    tokens: list[str] = []
    for chunk in _BREAK_RE.split(text):
        if not chunk:
            continue
        tokens.extend(_PUNCT_SPLIT_RE.findall(chunk))
    return TokenSequence(tuple(tokens))


def remove_stopwords(tokens: Iterable[str], stoplist: frozenset[str]) -> list[str]:
    """Order-preserving filter; punctuation tokens are dropped here too."""
    return [t for t in tokens if t not in stoplist and not is_punctuation_token(t)]


def stem(token: str, suffix_table: Sequence[tuple[str, str]]) -> str:
    """Strip the longest matching suffix; at most one rule fires per token.

    A rule is skipped when its output would be shorter than 2 codepoints,
    in which case shorter suffixes are still considered.
    """
    for suffix, replacement in suffix_table:
        if len(token) > len(suffix) and token.endswith(suffix):
            candidate = token[: len(token) - len(suffix)] + replacement
            if len(candidate) >= 2:
                return candidate
    return token


def stem_tokens(tokens: Iterable[str], suffix_table: Sequence[tuple[str, str]]) -> list[str]:
    return [stem(t, suffix_table) for t in tokens]


def encode(tokens: Iterable[str], vocabulary) -> list[int]:
    """Map tokens to vocabulary ids; out-of-vocabulary tokens map to UNK id 0."""
    table = vocabulary.term_to_id
    return [table.get(t, 0) for t in tokens]


def preprocess_text(text: str, config: PreprocessConfig) -> TokenSequence:
    """Full modeling-time pipeline: clean, tokenize, stop-word filter, stem."""
    cleaned = clean_text(text, config)
    tokens = remove_stopwords(tokenize(cleaned), config.stoplist)
    return TokenSequence(tuple(stem_tokens(tokens, config.suffix_table)))


_DEFAULT_CLEAN_CONFIG = PreprocessConfig()
