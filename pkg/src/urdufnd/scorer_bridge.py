"""Client side of the external-predictor wire protocol.

Frame = 4-byte big-endian length + one UTF-8 JSON document. Message types:
"hello" (handshake) and "score" (batch scoring); protocol version "1.0".
The full schemas live in protocol.md at the repository root.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
import uuid
from dataclasses import dataclass

from .classifiers import PredictorOutput
from .errors import ProtocolError

PROTOCOL_VERSION = "1.0"
MAX_FRAME_BYTES = 16 * 1024 * 1024
DEFAULT_MAX_BATCH = 32


class UnreachableError(ProtocolError):
    pass


class VersionIncompatibleError(ProtocolError):
    pass


class ScorerTimeoutError(ProtocolError):
    pass


class MalformedResponseError(ProtocolError):
    """Validation failure; carries the offending payload."""

    def __init__(self, message: str, payload=None):
        super().__init__(message)
        self.payload = payload


class ScorerError(ProtocolError):
    """The scorer reported an error for this request."""


@dataclass(frozen=True)
class ScorerEndpoint:
    address: str  # "host:port" or a local socket path
    timeout_ms: int = 5000
    max_in_flight: int = 1
    protocol_version: str = PROTOCOL_VERSION

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


@dataclass(frozen=True)
class Capabilities:
    model_name: str
    protocol_version: str
    max_batch: int


def send_frame(sock: socket.socket, payload: dict) -> None:
    data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
    sock.sendall(struct.pack(">I", len(data)) + data)


def _recv_exact(sock: socket.socket, count: int) -> bytes:
    buffer = b""
    while len(buffer) < count:
        chunk = sock.recv(count - len(buffer))
        if not chunk:
            raise UnreachableError("connection closed by scorer")
        buffer += chunk
    return buffer


def recv_frame(sock: socket.socket) -> dict:
    header = _recv_exact(sock, 4)
    length = struct.unpack(">I", header)[0]
    if not 0 < length <= MAX_FRAME_BYTES:
        raise MalformedResponseError(f"invalid frame length {length}")
    body = _recv_exact(sock, length)
    try:
        payload = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedResponseError(f"frame is not valid JSON: {exc}", body) from None
    if not isinstance(payload, dict):
        raise MalformedResponseError("frame is not a JSON object", payload)
    return payload


def _major(version: str) -> str:
    return str(version).split(".")[0]


class _Connection:
    def __init__(self, address: str, timeout_ms: int):
        self.dead_ids: set[str] = set()
        try:
            if ":" in address and "/" not in address:
                host, _, port = address.rpartition(":")
                self.sock = socket.create_connection(
                    (host or "127.0.0.1", int(port)), timeout=timeout_ms / 1000.0
                )
            else:
                self.sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
                self.sock.settimeout(timeout_ms / 1000.0)
                self.sock.connect(address)
        except (OSError, ValueError) as exc:
            raise UnreachableError(f"cannot connect to scorer at {address}: {exc}") from None

    def request(self, payload: dict) -> dict:
        """One request/response exchange with stale-response discarding."""
        request_id = payload["request_id"]
        try:
            send_frame(self.sock, payload)
            while True:
                response = recv_frame(self.sock)
                response_id = response.get("request_id")
                if response_id in self.dead_ids:
                    self.dead_ids.discard(response_id)
                    continue  # late answer to a timed-out request: not a vote
                if response_id != request_id:
                    raise MalformedResponseError(
                        f"response id {response_id!r} does not match request "
                        f"{request_id!r}", response,
                    )
                return response
        except socket.timeout:
            self.dead_ids.add(request_id)
            raise ScorerTimeoutError(f"scorer did not answer within timeout") from None
        except BrokenPipeError as exc:
            raise UnreachableError(f"scorer connection lost: {exc}") from None

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class ScorerClient:
    """Thread-safe client; at most max_in_flight outstanding requests."""

    def __init__(self, endpoint: ScorerEndpoint):
        self.endpoint = endpoint
        self._slots = threading.BoundedSemaphore(endpoint.max_in_flight)
        self._pool_lock = threading.Lock()
        self._pool: list[_Connection] = []
        self._capabilities: Capabilities | None = None

    # -- connection pool -----------------------------------------------------
    def _borrow(self) -> _Connection:
        with self._pool_lock:
            if self._pool:
                return self._pool.pop()
        return _Connection(self.endpoint.address, self.endpoint.timeout_ms)

    def _give_back(self, conn: _Connection) -> None:
        with self._pool_lock:
            self._pool.append(conn)

    def close(self) -> None:
        with self._pool_lock:
            for conn in self._pool:
                conn.close()
            self._pool.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- protocol ------------------------------------------------------------
    @property
    def max_batch(self) -> int:
        if self._capabilities is None:
            self.handshake()
        return self._capabilities.max_batch

    def handshake(self) -> Capabilities:
        payload = {
            "type": "hello",
            "request_id": uuid.uuid4().hex,
            "protocol_version": self.endpoint.protocol_version,
        }
        with self._slots:
            conn = self._borrow()
            try:
                response = conn.request(payload)
            except ProtocolError:
                conn.close()
                raise
            self._give_back(conn)
        version = response.get("protocol_version", "")
        if _major(version) != _major(self.endpoint.protocol_version):
            raise VersionIncompatibleError(
                f"scorer speaks protocol {version!r}, client expects major "
                f"{_major(self.endpoint.protocol_version)!r}"
            )
        capabilities = Capabilities(
            model_name=str(response.get("model_name", "")),
            protocol_version=version,
            max_batch=int(response.get("max_batch", DEFAULT_MAX_BATCH)),
        )
        self._capabilities = capabilities
        return capabilities

    def score_batch(self, texts: list[str]) -> list[PredictorOutput]:
        """Score a batch, retrying once on timeout with a fresh request id."""
        if self._capabilities is None:
            self.handshake()
        if len(texts) > self._capabilities.max_batch:
            raise ValueError(
                f"batch of {len(texts)} exceeds scorer max_batch "
                f"{self._capabilities.max_batch}"
            )
        with self._slots:
            conn = self._borrow()
            try:
                try:
                    response = self._score_once(conn, texts)
                except ScorerTimeoutError:
                    response = self._score_once(conn, texts)  # single retry
            except ScorerTimeoutError:
                self._give_back(conn)
                raise
            except ProtocolError:
                conn.close()
                raise
            else:
                self._give_back(conn)
        return self._validate(response, texts)

    def _score_once(self, conn: _Connection, texts: list[str]) -> dict:
        payload = {
            "type": "score",
            "request_id": uuid.uuid4().hex,
            "texts": list(texts),
        }
        return conn.request(payload)

    @staticmethod
    def _validate(response: dict, texts: list[str]) -> list[PredictorOutput]:
        if response.get("error"):
            raise ScorerError(str(response["error"]))
        scores = response.get("scores")
        if not isinstance(scores, list) or len(scores) != len(texts):
            raise MalformedResponseError(
                f"expected {len(texts)} scores, got "
                f"{len(scores) if isinstance(scores, list) else type(scores).__name__}",
                response,
            )
        outputs = []
        for entry in scores:
            try:
                legit = float(entry["legit"])
                fake = float(entry["fake"])
            except (TypeError, KeyError, ValueError):
                raise MalformedResponseError(f"malformed score entry: {entry!r}", response)
            if min(legit, fake) < -1e-9 or abs(legit + fake - 1.0) > 1e-6:
                raise MalformedResponseError(
                    f"score pair off the probability simplex: {entry!r}", response
                )
            outputs.append(PredictorOutput.from_probs(legit, fake))
        return outputs


def handshake(endpoint: ScorerEndpoint) -> Capabilities:
    """One-shot capability probe (used by the CLI's serve-check)."""
    with ScorerClient(endpoint) as client:
        return client.handshake()
