import random
import sys
from pathlib import Path

import pytest

# The core toolkit's conformance suite drives these tests over the wire; it
# lives with the core package's tests.
sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "tests"))

LETTERS = "ابپتٹثجچحخدڈذرڑزژسشصضطظعغفقکگلمنںوہیے"


def synth_word(rng, lo=3, hi=7):
    return "".join(rng.choice(LETTERS) for _ in range(rng.randint(lo, hi)))


def synth_corpus_rows(rng, n):
    """Class-separable toy rows in the core corpus schema."""
    fake_core = sorted({synth_word(rng) for _ in range(30)})
    legit_core = []
    while len(legit_core) < 30:
        candidate = synth_word(rng)
        if candidate not in fake_core and candidate not in legit_core:
            legit_core.append(candidate)
    rows = []
    for i in range(n):
        fake = i % 2 == 0
        core = fake_core if fake else legit_core
        words = [rng.choice(core) for _ in range(10)]
        rng.shuffle(words)
        rows.append({
            "id": f"t{i}",
            "text": " ".join(words),
            "label": "fake" if fake else "legit",
            "domain": None,
            "source_id": "toy",
        })
    return rows


def write_export(path, rows):
    import json

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


@pytest.fixture(scope="session")
def toy_export(tmp_path_factory):
    """200-example training export in the core line-delimited format."""
    path = tmp_path_factory.mktemp("data") / "train_export.jsonl"
    write_export(path, synth_corpus_rows(random.Random(41), 200))
    return path


@pytest.fixture(scope="session")
def toy_backbone(tmp_path_factory, toy_export):
    from scorer_service.backbones import make_toy_backbone
    from scorer_service.data import read_training_export

    texts, _ = read_training_export(toy_export)
    return make_toy_backbone(texts, tmp_path_factory.mktemp("backbone") / "toy",
                             seed=1)


@pytest.fixture(scope="session")
def toy_checkpoint(tmp_path_factory, toy_backbone, toy_export):
    from scorer_service.backbones import FineTuneConfig
    from scorer_service.finetune import fine_tune

    result = fine_tune(
        toy_backbone, toy_export,
        tmp_path_factory.mktemp("ckpt") / "toy-finetuned",
        FineTuneConfig(epochs=3, batch_size=16, learning_rate=1e-3, seed=5),
    )
    return result
