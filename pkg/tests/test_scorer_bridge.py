import json
import struct
import time

import pytest

from protocol_conformance import run_server_conformance
from urdufnd.corpus import Label
from urdufnd.mock_scorer import MockScorer
from urdufnd.scorer_bridge import (
    MalformedResponseError,
    ScorerClient,
    ScorerEndpoint,
    ScorerError,
    ScorerTimeoutError,
    UnreachableError,
    VersionIncompatibleError,
    handshake,
    recv_frame,
    send_frame,
)


@pytest.fixture()
def server():
    with MockScorer(scorer=lambda text: (0.3, 0.7)) as instance:
        yield instance


def client_for(server, timeout_ms=500, **kwargs):
    return ScorerClient(ScorerEndpoint(server.address, timeout_ms=timeout_ms, **kwargs))


class TestHandshake:
    def test_capabilities(self, server):
        capabilities = handshake(ScorerEndpoint(server.address, timeout_ms=500))
        assert capabilities.model_name == "mock-scorer"
        assert capabilities.protocol_version == "1.0"
        assert capabilities.max_batch == 32

    def test_minor_version_compatible(self):
        with MockScorer(protocol_version="1.3") as server:
            capabilities = handshake(ScorerEndpoint(server.address, timeout_ms=500))
            assert capabilities.protocol_version == "1.3"

    def test_major_version_incompatible(self):
        with MockScorer(protocol_version="2.0") as server:
            with pytest.raises(VersionIncompatibleError):
                handshake(ScorerEndpoint(server.address, timeout_ms=500))

    def test_unreachable_within_timeout(self):
        started = time.monotonic()
        with pytest.raises(UnreachableError):
            handshake(ScorerEndpoint("127.0.0.1:1", timeout_ms=400))
        assert time.monotonic() - started < 5.0


class TestScoreBatch:
    def test_outputs_follow_argmax_tie_rule(self, server):
        with client_for(server) as client:
            outputs = client.score_batch(["الف", "ب"])
        assert [o.predicted for o in outputs] == [Label.FAKE, Label.FAKE]
        assert outputs[0].probs[Label.FAKE] == pytest.approx(0.7)

    def test_half_half_scores_predict_fake(self):
        with MockScorer() as server:  # default scorer returns 0.5/0.5
            with client_for(server) as client:
                outputs = client.score_batch(["متن"] * 10)
        assert len(outputs) == 10
        assert all(o.predicted is Label.FAKE for o in outputs)

    def test_batch_size_enforced(self):
        with MockScorer(max_batch=4) as server:
            with client_for(server) as client:
                with pytest.raises(ValueError, match="max_batch"):
                    client.score_batch(["x"] * 5)

    def test_simplex_violation_is_malformed(self, server):
        server.faults.append({"mode": "bad_sum"})
        with client_for(server) as client:
            with pytest.raises(MalformedResponseError) as info:
                client.score_batch(["x"])
        assert info.value.payload is not None  # offending payload attached

    def test_mismatched_id_is_malformed(self, server):
        server.faults.append({"mode": "wrong_id"})
        with client_for(server) as client:
            with pytest.raises(MalformedResponseError):
                client.score_batch(["x"])

    def test_length_mismatch_is_malformed(self, server):
        server.faults.append({"mode": "length_mismatch"})
        with client_for(server) as client:
            with pytest.raises(MalformedResponseError):
                client.score_batch(["x", "y"])

    def test_error_field_raises_scorer_error(self, server):
        server.faults.append({"mode": "error", "message": "backend exploded"})
        with client_for(server) as client:
            with pytest.raises(ScorerError, match="backend exploded"):
                client.score_batch(["x"])


class TestTimeoutRetry:
    def test_single_timeout_retried_and_late_reply_discarded(self, server):
        server.faults.append({"mode": "delay", "seconds": 0.9})
        with client_for(server, timeout_ms=500) as client:
            outputs = client.score_batch(["الف"])
            assert len(outputs) == 1
            # The delayed response to the first id must not leak into the
            # next exchange as a spurious vote.
            again = client.score_batch(["ب"])
            assert len(again) == 1
        assert server.requests_seen == 3  # original + retry + follow-up

    def test_two_timeouts_raise(self, server):
        server.faults.append({"mode": "drop"})
        server.faults.append({"mode": "drop"})
        with client_for(server, timeout_ms=300) as client:
            with pytest.raises(ScorerTimeoutError):
                client.score_batch(["x"])

    def test_recovery_after_double_timeout(self, server):
        server.faults.append({"mode": "drop"})
        server.faults.append({"mode": "drop"})
        with client_for(server, timeout_ms=300) as client:
            with pytest.raises(ScorerTimeoutError):
                client.score_batch(["x"])
            outputs = client.score_batch(["y"])
            assert len(outputs) == 1


class TestWireFormat:
    def test_frame_layout_is_length_prefixed_json(self, server):
        import socket

        host, _, port = server.address.rpartition(":")
        with socket.create_connection((host, int(port)), timeout=2) as sock:
            body = json.dumps({
                "type": "hello", "request_id": "abc", "protocol_version": "1.0",
            }).encode("utf-8")
            sock.sendall(struct.pack(">I", len(body)) + body)
            header = sock.recv(4)
            (length,) = struct.unpack(">I", header)
            payload = b""
            while len(payload) < length:
                payload += sock.recv(length - len(payload))
        response = json.loads(payload.decode("utf-8"))
        assert response["request_id"] == "abc"
        assert response["max_batch"] == 32

    def test_send_recv_helpers_round_trip(self, server):
        import socket

        host, _, port = server.address.rpartition(":")
        with socket.create_connection((host, int(port)), timeout=2) as sock:
            send_frame(sock, {"type": "hello", "request_id": "r1",
                              "protocol_version": "1.0"})
            response = recv_frame(sock)
        assert response["request_id"] == "r1"


class TestConcurrency:
    def test_max_in_flight_bounds_connection_pool(self, server):
        from concurrent.futures import ThreadPoolExecutor

        with client_for(server, timeout_ms=2000, max_in_flight=2) as client:
            client.handshake()
            with ThreadPoolExecutor(max_workers=6) as pool:
                results = list(pool.map(
                    lambda i: client.score_batch([f"متن {i}"]), range(12)
                ))
            assert all(len(r) == 1 for r in results)
            # The pool never grows past the in-flight bound.
            assert len(client._pool) <= 2


class TestServerConformance:
    def test_mock_passes_full_server_suite(self, server):
        run_server_conformance(server.address, ["خبر ایک", "خبر دو", "خبر ایک"])
