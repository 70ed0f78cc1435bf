"""Protocol-1.0 scorer server over a fine-tuned checkpoint.

Framing and message handling are implemented here from the protocol
document alone; the service shares no code with the core toolkit. One
frame is in flight per connection; multiple connections are accepted and
inference batches run sequentially under a model lock.
"""

from __future__ import annotations

import json
import logging
import socket
import struct
import threading
from pathlib import Path

from . import PROTOCOL_VERSION
from .finetune import META_FILE

log = logging.getLogger(__name__)

MAX_FRAME_BYTES = 16 * 1024 * 1024


def _read_exact(conn: socket.socket, count: int) -> bytes | None:
    buffer = b""
    while len(buffer) < count:
        chunk = conn.recv(count - len(buffer))
        if not chunk:
            return None
        buffer += chunk
    return buffer


def read_frame(conn: socket.socket) -> dict | None:
    header = _read_exact(conn, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if not 0 < length <= MAX_FRAME_BYTES:
        raise ValueError(f"invalid frame length {length}")
    body = _read_exact(conn, length)
    if body is None:
        return None
    return json.loads(body.decode("utf-8"))


def write_frame(conn: socket.socket, payload: dict) -> None:
    body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
    conn.sendall(struct.pack(">I", len(body)) + body)


class ScorerServer:
    def __init__(
        self,
        checkpoint_dir: str | Path,
        host: str = "127.0.0.1",
        port: int = 0,
        max_batch: int = 32,
        model_name: str | None = None,
    ):
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        from .backbones import quiet_transformers

        quiet_transformers()
        checkpoint = Path(checkpoint_dir)
        meta = json.loads((checkpoint / META_FILE).read_text("utf-8"))
        self.meta = meta
        self.model_name = model_name or meta.get("protocol_model_name", checkpoint.name)
        self.max_batch = max_batch
        self.max_sequence_length = int(meta["backbone"]["max_sequence_length"])
        self.degenerate = meta.get("degenerate")

        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(str(checkpoint))
        self._model = AutoModelForSequenceClassification.from_pretrained(str(checkpoint))
        self._model.eval()
        self._inference_lock = threading.Lock()

        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(16)
        self._stopping = threading.Event()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)

    @property
    def address(self) -> str:
        host, port = self._listener.getsockname()
        return f"{host}:{port}"

    def start(self) -> "ScorerServer":
        self._thread.start()
        log.info("scorer %s serving on %s", self.model_name, self.address)
        return self

    def stop(self) -> None:
        self._stopping.set()
        try:
            self._listener.close()
        except OSError:
            pass
        self._thread.join(timeout=3)

    def serve_forever(self) -> None:
        self.start()
        self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    # -- connection handling ---------------------------------------------------
    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._serve_connection, args=(conn,),
                             daemon=True).start()

    def _serve_connection(self, conn: socket.socket) -> None:
        with conn:
            while not self._stopping.is_set():
                try:
                    request = read_frame(conn)
                except (ValueError, json.JSONDecodeError, OSError):
                    return
                if request is None:
                    return
                response = self._dispatch(request)
                try:
                    write_frame(conn, response)
                except OSError:
                    return

    def _dispatch(self, request: dict) -> dict:
        request_id = request.get("request_id")
        kind = request.get("type")
        if kind == "hello":
            return {
                "type": "hello",
                "request_id": request_id,
                "protocol_version": PROTOCOL_VERSION,
                "model_name": self.model_name,
                "max_batch": self.max_batch,
            }
        if kind != "score":
            # Protocol errors go in the error field, never dropped connections.
            return {"type": "score", "request_id": request_id,
                    "error": f"unknown message type {kind!r}"}
        texts = request.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            return {"type": "score", "request_id": request_id,
                    "error": "texts must be a list of strings"}
        if len(texts) > self.max_batch:
            return {"type": "score", "request_id": request_id,
                    "error": f"batch of {len(texts)} exceeds max_batch {self.max_batch}"}
        try:
            scores = self._score(texts)
        except Exception as exc:  # surfaced, not dropped
            log.exception("scoring failed")
            return {"type": "score", "request_id": request_id, "error": str(exc)}
        return {
            "type": "score",
            "request_id": request_id,
            "model_name": self.model_name,
            "scores": scores,
        }

    def _score(self, texts: list[str]) -> list[dict]:
        if not texts:
            return []
        if self.degenerate is not None:
            fake = 1.0 if self.degenerate == "fake" else 0.0
            return [{"legit": 1.0 - fake, "fake": fake} for _ in texts]
        torch = self._torch
        with self._inference_lock:
            encoded = self._tokenizer(
                texts, truncation=True, max_length=self.max_sequence_length,
                padding=True, return_tensors="pt",
            )
            with torch.no_grad():
                logits = self._model(**encoded).logits
            probs = torch.softmax(logits.double(), dim=1)
        return [
            {"legit": float(row[0]), "fake": float(row[1])}
            for row in probs.tolist()
        ]
