"""Majority-vote stacking of in-process models and external scorers."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .classifiers import PredictorOutput, TrainedModel, predict_batch
from .classifiers.base import argmax_label
from .corpus import LABEL_ORDER, Label, NewsRecord
from .errors import DataError, ProtocolError
from .features import TextPipeline

log = logging.getLogger(__name__)


class NoVotesError(DataError):
    pass


class AllPredictorsFailedError(DataError):
    pass


class PredictorKind(Enum):
    IN_PROCESS_MODEL = "model"
    EXTERNAL_SCORER = "scorer"


@dataclass
class Predictor:
    id: str
    kind: PredictorKind
    handle: object  # TrainedModel or scorer client


@dataclass
class VoteRecord:
    item_id: str
    outputs: dict[str, PredictorOutput]
    tally: dict[str, int]
    decision: Label
    tie_broken: bool

    def to_json(self) -> str:
        payload = {
            "item_id": self.item_id,
            "outputs": {
                pid: {
                    "legit": out.probs[Label.LEGIT],
                    "fake": out.probs[Label.FAKE],
                    "predicted": out.predicted.value,
                }
                for pid, out in sorted(self.outputs.items())
            },
            "tally": self.tally,
            "decision": self.decision.value,
            "tie_broken": self.tie_broken,
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "VoteRecord":
        payload = json.loads(line)
        outputs = {
            pid: PredictorOutput.from_probs(entry["legit"], entry["fake"])
            for pid, entry in payload["outputs"].items()
        }
        return cls(
            item_id=payload["item_id"],
            outputs=outputs,
            tally=dict(payload["tally"]),
            decision=Label(payload["decision"]),
            tie_broken=bool(payload["tie_broken"]),
        )


def aggregate(outputs: Mapping[str, PredictorOutput] | Sequence[PredictorOutput],
              item_id: str = "") -> tuple[Label, VoteRecord]:
    """Plurality vote over predictor outputs.

    Ties go to the label with the higher mean probability across all voters;
    a residual tie goes to FAKE. ``tie_broken`` is set whenever the plurality
    was not strict.
    """
    if not isinstance(outputs, Mapping):
        outputs = {str(i): out for i, out in enumerate(outputs)}
    if not outputs:
        raise NoVotesError("aggregate needs at least one predictor output")

    tally = {label: 0 for label in LABEL_ORDER}
    for out in outputs.values():
        tally[out.predicted] += 1

    top = max(tally.values())
    leaders = [label for label in LABEL_ORDER if tally[label] == top]
    if len(leaders) == 1:
        decision, tie_broken = leaders[0], False
    else:
        tie_broken = True
        means = {
            label: sum(out.probs[label] for out in outputs.values()) / len(outputs)
            for label in leaders
        }
        decision = argmax_label(means)

    record = VoteRecord(
        item_id=item_id,
        outputs=dict(outputs),
        tally={label.value: count for label, count in tally.items()},
        decision=decision,
        tie_broken=tie_broken,
    )
    return decision, record


def _score_with_model(predictor: Predictor, vectors, vocabulary_hash: str):
    outputs: dict[int, PredictorOutput] = {}
    model: TrainedModel = predictor.handle
    for i, vector in enumerate(vectors):
        try:
            outputs[i] = predict_batch(model, [vector], vocabulary_hash)[0]
        except Exception as exc:
            log.warning("predictor %s failed on item %d: %s", predictor.id, i, exc)
    return outputs


def _score_with_scorer(predictor: Predictor, texts: Sequence[str], jobs: int):
    from .scorer_bridge import ScorerClient

    client: ScorerClient = predictor.handle
    max_batch = client.max_batch
    batches = [
        (start, texts[start : start + max_batch])
        for start in range(0, len(texts), max_batch)
    ]

    def run(batch):
        start, chunk = batch
        try:
            return start, client.score_batch(list(chunk))
        except ProtocolError as exc:
            log.warning(
                "scorer %s failed on items %d..%d: %s",
                predictor.id, start, start + len(chunk) - 1, exc,
            )
            return start, None

    outputs: dict[int, PredictorOutput] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, batches))
    else:
        results = [run(b) for b in batches]
    for start, scored in results:
        if scored is None:
            continue
        for offset, output in enumerate(scored):
            outputs[start + offset] = output
    return outputs


def run_ensemble(
    predictors: Sequence[Predictor],
    records: Sequence[NewsRecord],
    pipeline: TextPipeline,
    jobs: int = 1,
) -> list[VoteRecord]:
    """Score every record with every predictor and majority-vote per item.

    Each item is preprocessed once; in-process models get feature vectors,
    external scorers get the cleaned (unstemmed) text. A failing predictor
    loses only its own votes for the affected items.
    """
    ids = [predictor.id for predictor in predictors]
    if len(set(ids)) != len(ids):
        raise DataError("predictor ids must be unique within an ensemble")

    cleaned = [pipeline.clean(record.text) for record in records]
    vectors = None
    if any(p.kind is PredictorKind.IN_PROCESS_MODEL for p in predictors):
        vectors = [pipeline.vectorize(record.text) for record in records]
    vocabulary_hash = pipeline.vocabulary.hash()

    per_predictor: dict[str, dict[int, PredictorOutput]] = {}
    for predictor in predictors:
        if predictor.kind is PredictorKind.IN_PROCESS_MODEL:
            per_predictor[predictor.id] = _score_with_model(
                predictor, vectors, vocabulary_hash
            )
        else:
            per_predictor[predictor.id] = _score_with_scorer(predictor, cleaned, jobs)

    votes: list[VoteRecord] = []
    for i, record in enumerate(records):
        outputs = {
            pid: outs[i] for pid, outs in per_predictor.items() if i in outs
        }
        if not outputs:
            raise AllPredictorsFailedError(
                f"every predictor failed on item {record.id!r}"
            )
        _, vote = aggregate(outputs, item_id=record.id)
        votes.append(vote)
    return votes


def write_votes(votes: Iterable[VoteRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for vote in votes:
            fh.write(vote.to_json() + "\n")


def read_votes(path) -> list[VoteRecord]:
    votes = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                votes.append(VoteRecord.from_json(line))
    return votes
