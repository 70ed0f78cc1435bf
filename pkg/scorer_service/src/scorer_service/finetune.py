"""Fine-tune a classification head on a training export and write a servable
checkpoint.

Deterministic given the seed up to torch CPU kernel guarantees; the epoch
loss trace and truncation count land in metrics.json next to the weights.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backbones import FineTuneConfig, spec_for, load_backbone
from .data import read_training_export

log = logging.getLogger(__name__)

META_FILE = "scorer_meta.json"
METRICS_FILE = "metrics.json"


@dataclass
class FineTuneResult:
    checkpoint_dir: Path
    epoch_loss: list[float]
    truncated: int
    examples: int
    degenerate: str | None


def fine_tune(
    backbone: str | Path,
    train_export: str | Path,
    out_dir: str | Path,
    config: FineTuneConfig | None = None,
) -> FineTuneResult:
    import torch

    config = config or FineTuneConfig()
    spec = spec_for(backbone)
    texts, labels = read_training_export(train_export)
    if config.max_examples is not None:
        texts, labels = texts[: config.max_examples], labels[: config.max_examples]

    random.seed(config.seed)
    np.random.seed(config.seed)
    torch.manual_seed(config.seed)

    tokenizer, model = load_backbone(backbone, num_labels=2)

    degenerate = None
    if len(set(labels)) == 1:
        degenerate = "fake" if labels[0] == 1 else "legit"
        log.warning("training export is single-class (%s); model flagged degenerate",
                    degenerate)

    # SequenceOverflow policy: truncate, count, warn, never crash.
    max_len = spec.max_sequence_length
    overflow = tokenizer(texts, truncation=False, padding=False)["input_ids"]
    truncated = sum(1 for ids in overflow if len(ids) > max_len)
    if truncated:
        log.warning("%d of %d examples exceed %d tokens and were truncated",
                    truncated, len(texts), max_len)
    encoded = tokenizer(texts, truncation=True, max_length=max_len,
                        padding=True, return_tensors="pt")
    targets = torch.tensor(labels)

    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    generator = torch.Generator().manual_seed(config.seed)
    n = len(texts)
    epoch_loss: list[float] = []
    model.train()
    for epoch in range(config.epochs):
        order = torch.randperm(n, generator=generator)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            output = model(
                input_ids=encoded["input_ids"][batch],
                attention_mask=encoded["attention_mask"][batch],
                labels=targets[batch],
            )
            output.loss.backward()
            optimizer.step()
            optimizer.zero_grad()
            total += output.loss.item() * len(batch)
        epoch_loss.append(total / n)
        log.info("epoch %d: training loss %.5f", epoch, epoch_loss[-1])

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    meta = {
        "protocol_model_name": spec.model_name,
        "backbone": spec.to_dict(),
        "label_columns": ["legit", "fake"],
        "degenerate": degenerate,
        "seed": config.seed,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
    }
    (out / META_FILE).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    metrics = {"epoch_loss": epoch_loss, "truncated": truncated, "examples": n}
    (out / METRICS_FILE).write_text(json.dumps(metrics, indent=2) + "\n",
                                    encoding="utf-8")
    return FineTuneResult(out, epoch_loss, truncated, n, degenerate)
