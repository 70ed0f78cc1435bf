"""Backbone descriptors and the local toy-backbone builder.

Named pretrained multilingual backbones load through the transformers hub
or a local directory; when neither is obtainable the loader raises
BackboneUnavailable. ``make_toy_backbone`` materializes a tiny randomly
initialized BERT-style model with a corpus-derived WordPiece vocabulary so
toy-scale fine-tuning and serving work fully offline.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class BackboneUnavailable(Exception):
    pass


class ObjectiveFamily(Enum):
    MASKED_LM = "masked_lm"
    AUTOREGRESSIVE = "autoregressive"


class TokenizerFamily(Enum):
    BYTE_PAIR = "byte_pair"
    WORDPIECE = "wordpiece"
    SENTENCEPIECE = "sentencepiece"


@dataclass(frozen=True)
class BackboneSpec:
    model_name: str
    objective_family: ObjectiveFamily
    tokenizer_family: TokenizerFamily
    max_sequence_length: int = 128

    def __post_init__(self):
        if self.max_sequence_length < 16:
            raise ValueError("max_sequence_length must be >= 16")

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "objective_family": self.objective_family.value,
            "tokenizer_family": self.tokenizer_family.value,
            "max_sequence_length": self.max_sequence_length,
        }


@dataclass
class FineTuneConfig:
    epochs: int = 10
    batch_size: int = 16
    learning_rate: float = 2e-5
    seed: int = 0
    max_examples: int | None = 1000

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 16 <= self.batch_size <= 32:
            raise ValueError("batch_size must be in 16..32")
        if not 0 < self.learning_rate < 1:
            raise ValueError("learning_rate must be in (0, 1)")


# Multilingual sequence-classification families reachable by name when the
# hub (or a local snapshot) is available.
KNOWN_BACKBONES: dict[str, tuple[ObjectiveFamily, TokenizerFamily]] = {
    "bert-base-multilingual-cased": (ObjectiveFamily.MASKED_LM, TokenizerFamily.WORDPIECE),
    "distilbert-base-multilingual-cased": (ObjectiveFamily.MASKED_LM, TokenizerFamily.WORDPIECE),
    "xlm-roberta-base": (ObjectiveFamily.MASKED_LM, TokenizerFamily.SENTENCEPIECE),
    "xlnet-base-cased": (ObjectiveFamily.AUTOREGRESSIVE, TokenizerFamily.SENTENCEPIECE),
    "roberta-base": (ObjectiveFamily.MASKED_LM, TokenizerFamily.BYTE_PAIR),
    "microsoft/deberta-v3-base": (ObjectiveFamily.MASKED_LM, TokenizerFamily.SENTENCEPIECE),
    "gpt2": (ObjectiveFamily.AUTOREGRESSIVE, TokenizerFamily.BYTE_PAIR),
}

SPEC_FILE = "backbone_spec.json"


def spec_for(backbone: str | Path, max_sequence_length: int | None = None) -> BackboneSpec:
    """Resolve a backbone name or local directory to its descriptor."""
    path = Path(backbone)
    if (path / SPEC_FILE).exists():
        payload = json.loads((path / SPEC_FILE).read_text("utf-8"))
        if max_sequence_length is not None:
            payload["max_sequence_length"] = max_sequence_length
        return BackboneSpec(
            model_name=payload["model_name"],
            objective_family=ObjectiveFamily(payload["objective_family"]),
            tokenizer_family=TokenizerFamily(payload["tokenizer_family"]),
            max_sequence_length=int(payload["max_sequence_length"]),
        )
    name = str(backbone)
    if name in KNOWN_BACKBONES:
        objective, tokenizer = KNOWN_BACKBONES[name]
        return BackboneSpec(name, objective, tokenizer,
                            max_sequence_length or 128)
    raise BackboneUnavailable(
        f"{backbone!r} is neither a known backbone name nor a directory with "
        f"{SPEC_FILE}"
    )


def quiet_transformers() -> None:
    """Silence hub progress bars; they garble socket-server logs."""
    try:
        from transformers.utils import logging as hf_logging

        hf_logging.disable_progress_bar()
    except Exception:
        pass


def load_backbone(backbone: str | Path, num_labels: int = 2):
    """(tokenizer, model) for a name or local directory; offline-safe errors."""
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    quiet_transformers()
    try:
        tokenizer = AutoTokenizer.from_pretrained(str(backbone))
        model = AutoModelForSequenceClassification.from_pretrained(
            str(backbone), num_labels=num_labels
        )
    except Exception as exc:
        raise BackboneUnavailable(
            f"cannot obtain backbone weights for {backbone!r}: {exc}"
        ) from None
    return tokenizer, model


def make_toy_backbone(
    texts: list[str],
    out_dir: str | Path,
    vocab_cap: int = 2000,
    hidden_size: int = 64,
    num_layers: int = 2,
    num_heads: int = 2,
    max_sequence_length: int = 64,
    seed: int = 0,
) -> Path:
    """Materialize a tiny randomly initialized BERT-style backbone whose
    WordPiece vocabulary is derived from the given texts."""
    import torch
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizerFast

    quiet_transformers()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    counts = Counter(token for text in texts for token in text.split())
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += [word for word, _ in counts.most_common(vocab_cap)]
    vocab_file = out / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(str(vocab_file), do_lower_case=False)

    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=num_layers,
        num_attention_heads=num_heads,
        intermediate_size=hidden_size * 2,
        max_position_embeddings=max_sequence_length,
        num_labels=2,
    )
    model = BertForSequenceClassification(config)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)

    spec = BackboneSpec(
        model_name=out.name,
        objective_family=ObjectiveFamily.MASKED_LM,
        tokenizer_family=TokenizerFamily.WORDPIECE,
        max_sequence_length=max_sequence_length,
    )
    (out / SPEC_FILE).write_text(json.dumps(spec.to_dict(), indent=2) + "\n",
                                 encoding="utf-8")
    return out
