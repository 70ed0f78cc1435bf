"""Reader for the core toolkit's line-delimited corpus export."""

from __future__ import annotations

import json
from pathlib import Path

LABEL_TO_COLUMN = {"legit": 0, "fake": 1}


def read_training_export(path: str | Path) -> tuple[list[str], list[int]]:
    """(texts, label columns) from {id, text, label, ...} JSONL lines."""
    texts: list[str] = []
    labels: list[int] = []
    with open(path, "r", encoding="utf-8-sig") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            text = str(payload.get("text") or "").strip()
            label = str(payload.get("label") or "").strip().lower()
            if not text or label not in LABEL_TO_COLUMN:
                raise ValueError(
                    f"{path}:{lineno}: needs non-empty text and a legit/fake label"
                )
            texts.append(text)
            labels.append(LABEL_TO_COLUMN[label])
    if not texts:
        raise ValueError(f"{path}: no records")
    return texts, labels
