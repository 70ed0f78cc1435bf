"""Reproducibility manifest: every run records seed, config hashes, and
checksummed outputs. Timestamps live only here, never in hashed artifacts."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(payload) -> str:
    canonical = json.dumps(payload, ensure_ascii=False, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    subcommand: str
    seed: int
    tool_version: str
    config_hashes: dict[str, str] = field(default_factory=dict)
    inputs: list[str] = field(default_factory=list)
    outputs: list[dict] = field(default_factory=list)
    started_at: str = field(default_factory=_now)
    finished_at: str = ""

    def add_input(self, path: str | Path) -> None:
        self.inputs.append(str(path))

    def add_output(self, path: str | Path) -> None:
        self.outputs.append({"path": str(path), "sha256": file_sha256(path)})

    def write(self, path: str | Path) -> None:
        self.finished_at = _now()
        payload = {
            "subcommand": self.subcommand,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "config_hashes": self.config_hashes,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
