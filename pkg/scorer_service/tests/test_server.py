import pytest

from protocol_conformance import (
    check_duplicate_texts_score_identically,
    check_error_surfaced_not_dropped,
    check_handshake_raw,
    check_score_raw,
    run_server_conformance,
    _raw_exchange,
)
from scorer_service.server import ScorerServer


@pytest.fixture(scope="module")
def server(toy_checkpoint):
    with ScorerServer(toy_checkpoint.checkpoint_dir, max_batch=32) as instance:
        yield instance


class TestServer:
    def test_handshake_fields(self, server):
        response = check_handshake_raw(server.address)
        assert response["model_name"] == "toy"
        assert response["protocol_version"] == "1.0"

    def test_batch_of_32_probability_pairs(self, server):
        texts = [f"متن نمبر {i}" for i in range(32)]
        response = check_score_raw(server.address, texts)
        assert len(response["scores"]) == 32

    def test_identical_texts_identical_scores(self, server):
        check_duplicate_texts_score_identically(server.address, "ایک ہی متن")

    def test_unknown_type_surfaces_error(self, server):
        check_error_surfaced_not_dropped(server.address)

    def test_oversized_batch_is_error_not_drop(self, server):
        response = _raw_exchange(server.address, {
            "type": "score", "request_id": "big",
            "texts": ["x"] * 33,
        })
        assert response["request_id"] == "big"
        assert "max_batch" in response["error"]

    def test_full_conformance_battery(self, server):
        run_server_conformance(server.address, ["خبر ایک", "خبر دو", "خبر ایک"])

    def test_degenerate_checkpoint_serves_that_class(self, tmp_path):
        import random

        from conftest import synth_corpus_rows, write_export
        from scorer_service.backbones import FineTuneConfig, make_toy_backbone
        from scorer_service.data import read_training_export
        from scorer_service.finetune import fine_tune

        rows = [r for r in synth_corpus_rows(random.Random(2), 20)
                if r["label"] == "legit"]
        export = tmp_path / "single.jsonl"
        write_export(export, rows)
        texts, _ = read_training_export(export)
        backbone = make_toy_backbone(texts, tmp_path / "bb")
        result = fine_tune(backbone, export, tmp_path / "ckpt",
                           FineTuneConfig(epochs=1, learning_rate=1e-3, seed=0))
        with ScorerServer(result.checkpoint_dir) as degenerate_server:
            response = check_score_raw(degenerate_server.address, ["الف", "ب"])
        assert all(entry["legit"] == 1.0 for entry in response["scores"])
