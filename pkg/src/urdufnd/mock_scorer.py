"""In-repo mock scorer: a minimal protocol-1.0 server with fault injection.

Used by the protocol conformance tests and by serve-check demos. Fault
directives are consumed one per score request, in order:

    {"mode": "delay", "seconds": 0.2}   respond after a pause
    {"mode": "drop"}                    never respond to this request
    {"mode": "bad_sum"}                 probabilities that violate the simplex
    {"mode": "wrong_id"}                echo a bogus request id
    {"mode": "length_mismatch"}         one score too few
    {"mode": "error", "message": "..."} set the error field
"""

from __future__ import annotations

import argparse
import collections
import json
import socket
import threading
import time
from typing import Callable

from .scorer_bridge import PROTOCOL_VERSION, recv_frame, send_frame


def _default_scorer(text: str) -> tuple[float, float]:
    return 0.5, 0.5


class MockScorer:
    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        model_name: str = "mock-scorer",
        max_batch: int = 32,
        protocol_version: str = PROTOCOL_VERSION,
        scorer: Callable[[str], tuple[float, float]] = _default_scorer,
    ):
        self.model_name = model_name
        self.max_batch = max_batch
        self.protocol_version = protocol_version
        self.scorer = scorer
        self.faults: collections.deque[dict] = collections.deque()
        self.requests_seen = 0
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(8)
        self._stopping = threading.Event()
        self._thread = threading.Thread(target=self._serve, daemon=True)

    @property
    def address(self) -> str:
        host, port = self._listener.getsockname()
        return f"{host}:{port}"

    def start(self) -> "MockScorer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stopping.set()
        try:
            self._listener.close()
        except OSError:
            pass
        self._thread.join(timeout=2)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    # -- serving -------------------------------------------------------------
    def _serve(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._handle, args=(conn,), daemon=True).start()

    def _handle(self, conn: socket.socket) -> None:
        with conn:
            while not self._stopping.is_set():
                try:
                    request = recv_frame(conn)
                except Exception:
                    return
                response = self._respond(request)
                if response is None:
                    continue  # dropped on purpose
                try:
                    send_frame(conn, response)
                except OSError:
                    return

    def _respond(self, request: dict) -> dict | None:
        request_id = request.get("request_id")
        if request.get("type") == "hello":
            return {
                "type": "hello",
                "request_id": request_id,
                "protocol_version": self.protocol_version,
                "model_name": self.model_name,
                "max_batch": self.max_batch,
            }
        if request.get("type") != "score":
            return {"request_id": request_id, "error": f"unknown type {request.get('type')!r}"}

        self.requests_seen += 1
        fault = self.faults.popleft() if self.faults else None
        texts = request.get("texts", [])
        scores = []
        for text in texts:
            legit, fake = self.scorer(text)
            scores.append({"legit": legit, "fake": fake})
        response = {
            "type": "score",
            "request_id": request_id,
            "model_name": self.model_name,
            "scores": scores,
        }

        if fault is None:
            return response
        mode = fault.get("mode")
        if mode == "delay":
            time.sleep(float(fault.get("seconds", 0.2)))
            return response
        if mode == "drop":
            return None
        if mode == "bad_sum":
            response["scores"] = [{"legit": 0.7, "fake": 0.5} for _ in texts]
            return response
        if mode == "wrong_id":
            response["request_id"] = "not-the-request-id"
            return response
        if mode == "length_mismatch":
            response["scores"] = scores[:-1]
            return response
        if mode == "error":
            return {"type": "score", "request_id": request_id,
                    "error": str(fault.get("message", "injected failure"))}
        raise ValueError(f"unknown fault mode {mode!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Run a standalone mock scorer.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=7070)
    parser.add_argument("--model-name", default="mock-scorer")
    args = parser.parse_args(argv)
    server = MockScorer(host=args.host, port=args.port, model_name=args.model_name)
    server.start()
    print(f"mock scorer listening on {server.address}", flush=True)
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
