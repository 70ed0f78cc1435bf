import csv
import json
import random

import pytest

from urdufnd.cli import EXIT_DATA, EXIT_OK, EXIT_PROTOCOL, EXIT_USAGE, main
from urdufnd.mock_scorer import MockScorer

FAKE_CORE = ["جھوٹ", "افواہ", "دعوی", "مبالغہ", "سازش", "بہتان"]
LEGIT_CORE = ["رپورٹ", "بیان", "اجلاس", "فیصلہ", "اعلامیہ", "تحقیق"]
SHARED = ["خبر", "ملک", "شہر", "عوام"]


def synth_text(rng, fake):
    core = FAKE_CORE if fake else LEGIT_CORE
    words = [rng.choice(core) for _ in range(7)] + [rng.choice(SHARED) for _ in range(3)]
    rng.shuffle(words)
    return " ".join(words)


@pytest.fixture()
def source_dir(tmp_path):
    rng = random.Random(21)
    csv_path = tmp_path / "source.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["body", "verdict", "section"])
        for i in range(160):
            fake = i % 2 == 0
            writer.writerow([synth_text(rng, fake), "fake" if fake else "real",
                             rng.choice(["politics", "sports"])])
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({
        "source_id": "unit",
        "url": "https://example.test",
        "format": "delimited_table",
        "field_map": {"text": "body", "label": "verdict", "domain": "section"},
        "label_map": {"fake": "fake", "real": "legit"},
        "path": "source.csv",
    }), encoding="utf-8")
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


class TestExitCodes:
    def test_usage_error_is_one(self):
        assert run("train", "--algorithm", "nb") == EXIT_USAGE  # missing --corpus

    def test_unknown_subcommand_is_one(self):
        assert run("frobnicate") == EXIT_USAGE

    def test_data_error_is_two(self, tmp_path):
        assert run("stats", "--corpus", tmp_path / "missing.jsonl",
                   "--out-dir", tmp_path) == EXIT_DATA

    def test_protocol_error_is_three(self, tmp_path):
        assert run("serve-check", "--address", "127.0.0.1:1",
                   "--timeout-ms", "300", "--out-dir", tmp_path) == EXIT_PROTOCOL


class TestPipeline:
    def test_full_pipeline(self, source_dir, tmp_path, capsys):
        out = tmp_path / "run"
        assert run("harmonize", "--manifest", source_dir / "manifest.json",
                   "--train-ratio", "0.8", "--seed", "5", "--out-dir", out) == EXIT_OK
        assert (out / "corpus.jsonl").exists()
        assert (out / "split.json").exists()
        assert (out / "dedup_report.json").exists()
        manifest = json.loads((out / "manifest_harmonize.json").read_text())
        assert manifest["seed"] == 5
        assert {o["path"] for o in manifest["outputs"]} >= {
            str(out / "corpus.jsonl"), str(out / "split.json"),
        }
        assert all("sha256" in o for o in manifest["outputs"])

        assert run("stats", "--corpus", out / "corpus.jsonl", "--out-dir", out) == EXIT_OK
        stats = json.loads((out / "stats.json").read_text())
        assert stats["total"] == 160
        assert (out / "top_terms_fake.tsv").exists()
        assert (out / "top_terms_legit.tsv").exists()

        assert run("preprocess", "--corpus", out / "corpus.jsonl",
                   "--out-dir", out) == EXIT_OK
        first = json.loads((out / "tokens.jsonl").read_text().splitlines()[0])
        assert set(first) == {"id", "tokens"}

        assert run("train", "--corpus", out / "corpus.jsonl", "--split",
                   out / "split.json", "--algorithm", "nb", "--seed", "5",
                   "--out-dir", out) == EXIT_OK
        assert (out / "model_nb.bin").exists()
        assert (out / "vocabulary.tsv").exists()

        assert run("predict", "--model", out / "model_nb.bin", "--vocab",
                   out / "vocabulary.tsv", "--corpus", out / "corpus.jsonl",
                   "--split", out / "split.json", "--subset", "test",
                   "--out-dir", out) == EXIT_OK
        lines = (out / "predictions_nb.jsonl").read_text().splitlines()
        assert len(lines) == 32  # 20% of 160
        assert set(json.loads(lines[0])) == {"id", "predicted", "legit", "fake"}

        assert run("evaluate", "--predictions", out / "predictions_nb.jsonl",
                   "--corpus", out / "corpus.jsonl", "--split", out / "split.json",
                   "--subset", "test", "--per-source", "--out-dir", out) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["accuracy"] >= 0.9
        assert "unit" in report["per_source"]
        assert (out / "report.txt").read_text().startswith("Parameter")

    def test_ensemble_and_review_loop(self, source_dir, tmp_path):
        out = tmp_path / "run"
        run("harmonize", "--manifest", source_dir / "manifest.json",
            "--train-ratio", "0.8", "--seed", "5", "--out-dir", out)
        for algorithm in ("nb", "lr", "dt"):
            assert run("train", "--corpus", out / "corpus.jsonl", "--split",
                       out / "split.json", "--algorithm", algorithm, "--seed", "5",
                       "--out-dir", out) == EXIT_OK
        ensemble_config = out / "ensemble.json"
        ensemble_config.write_text(json.dumps({
            "predictors": [
                {"id": "nb", "kind": "model", "path": "model_nb.bin"},
                {"id": "lr", "kind": "model", "path": "model_lr.bin"},
                {"id": "dt", "kind": "model", "path": "model_dt.bin"},
            ]
        }), encoding="utf-8")
        assert run("ensemble", "--ensemble-config", ensemble_config, "--vocab",
                   out / "vocabulary.tsv", "--corpus", out / "corpus.jsonl",
                   "--split", out / "split.json", "--subset", "test",
                   "--out-dir", out) == EXIT_OK
        votes = (out / "votes.jsonl").read_text().splitlines()
        assert len(votes) == 32
        assert set(json.loads(votes[0])["outputs"]) == {"nb", "lr", "dt"}

        assert run("evaluate", "--predictions", out / "votes.jsonl", "--corpus",
                   out / "corpus.jsonl", "--split", out / "split.json",
                   "--subset", "test", "--model-id", "ensemble",
                   "--out-dir", out) == EXIT_OK

        assert run("export-review", "--votes", out / "votes.jsonl", "--corpus",
                   out / "corpus.jsonl", "--out-dir", out) == EXIT_OK
        assert (out / "review.jsonl").exists()
        assert (out / "review.tsv").read_text().startswith("item_id\t")

        assert run("import-review", "--review", out / "review.jsonl",
                   "--predictions", out / "votes.jsonl", "--corpus",
                   out / "corpus.jsonl", "--out-dir", out) == EXIT_OK
        amended = json.loads((out / "amended_report.json").read_text())
        assert amended["verdicts_applied"] == 0
        assert amended["original"] == amended["amended"]

    def test_ensemble_with_external_scorer(self, source_dir, tmp_path):
        out = tmp_path / "run"
        run("harmonize", "--manifest", source_dir / "manifest.json",
            "--train-ratio", "0.8", "--seed", "5", "--out-dir", out)
        run("train", "--corpus", out / "corpus.jsonl", "--split", out / "split.json",
            "--algorithm", "nb", "--seed", "5", "--out-dir", out)
        with MockScorer(scorer=lambda text: (0.2, 0.8)) as server:
            ensemble_config = out / "ensemble.json"
            ensemble_config.write_text(json.dumps({
                "predictors": [
                    {"id": "nb", "kind": "model", "path": "model_nb.bin"},
                    {"id": "ext", "kind": "scorer", "address": server.address,
                     "timeout_ms": 2000},
                ]
            }), encoding="utf-8")
            assert run("ensemble", "--ensemble-config", ensemble_config, "--vocab",
                       out / "vocabulary.tsv", "--corpus", out / "corpus.jsonl",
                       "--split", out / "split.json", "--subset", "test",
                       "--out-dir", out) == EXIT_OK
        votes = [json.loads(line) for line in (out / "votes.jsonl").read_text().splitlines()]
        assert all(set(v["outputs"]) == {"nb", "ext"} for v in votes)

    def test_serve_check_prints_capabilities(self, tmp_path, capsys):
        with MockScorer() as server:
            assert run("serve-check", "--address", server.address,
                       "--out-dir", tmp_path) == EXIT_OK
        printed = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert printed["model_name"] == "mock-scorer"
        assert printed["protocol_version"] == "1.0"


class TestDeterminism:
    def test_same_seed_byte_identical_artifacts(self, source_dir, tmp_path):
        outputs = []
        for name in ("a", "b"):
            out = tmp_path / name
            run("harmonize", "--manifest", source_dir / "manifest.json",
                "--train-ratio", "0.8", "--seed", "9", "--out-dir", out)
            run("train", "--corpus", out / "corpus.jsonl", "--split",
                out / "split.json", "--algorithm", "lr", "--seed", "9",
                "--out-dir", out)
            run("predict", "--model", out / "model_lr.bin", "--vocab",
                out / "vocabulary.tsv", "--corpus", out / "corpus.jsonl",
                "--split", out / "split.json", "--out-dir", out)
            run("evaluate", "--predictions", out / "predictions_lr.jsonl",
                "--corpus", out / "corpus.jsonl", "--split", out / "split.json",
                "--out-dir", out)
            outputs.append(out)
        a, b = outputs
        for artifact in ("corpus.jsonl", "split.json", "vocabulary.tsv",
                         "model_lr.bin", "predictions_lr.jsonl", "report.json"):
            assert (a / artifact).read_bytes() == (b / artifact).read_bytes(), artifact

    def test_seed_env_fallback(self, source_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("LUND_SEED", "77")
        out = tmp_path / "env"
        run("harmonize", "--manifest", source_dir / "manifest.json",
            "--out-dir", out)
        manifest = json.loads((out / "manifest_harmonize.json").read_text())
        assert manifest["seed"] == 77
