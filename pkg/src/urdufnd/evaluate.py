"""Confusion-matrix metrics, per-source reports, and the expert-review loop.

FAKE is the positive class for binary precision/recall/F1; macro-F1 averages
the two per-class F1 scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import Label, NewsRecord
from .ensemble import VoteRecord
from .errors import DataError


class LengthMismatchError(DataError):
    pass


class EmptyMatrixError(DataError):
    pass


class UnknownSourceError(DataError):
    pass


class UnknownItemIdError(DataError):
    pass


class ConflictingVerdictsError(DataError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.tp + other.tp, self.fp + other.fp,
            self.fn + other.fn, self.tn + other.tn,
        )

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def confusion(predictions: Sequence[Label], gold: Sequence[Label]) -> ConfusionMatrix:
    if len(predictions) != len(gold):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(gold)} gold labels"
        )
    if not predictions:
        raise LengthMismatchError("confusion needs at least one pair")
    tp = fp = fn = tn = 0
    for predicted, actual in zip(predictions, gold):
        if actual is Label.FAKE:
            if predicted is Label.FAKE:
                tp += 1
            else:
                fn += 1
        else:
            if predicted is Label.FAKE:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


@dataclass
class EvalReport:
    matrix: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    macro_f1: float
    undefined: list[str] = field(default_factory=list)
    per_source: dict[str, "EvalReport"] | None = None
    model_id: str = ""
    config_hash: str = ""
    timing: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        payload = {
            "matrix": self.matrix.to_dict(),
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "macro_f1": self.macro_f1,
            "undefined": list(self.undefined),
            "model_id": self.model_id,
            "config_hash": self.config_hash,
        }
        if include_timing:
            # Volatile: excluded from the canonical artifact so identical runs
            # produce byte-identical reports (wall time lives in the manifest).
            payload["timing"] = self.timing
        if self.per_source is not None:
            payload["per_source"] = {
                source: report.to_dict(include_timing)
                for source, report in sorted(self.per_source.items())
            }
        return payload

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), ensure_ascii=False,
                          sort_keys=True, indent=2)


def _ratio(numerator: int, denominator: int, name: str, undefined: list[str]) -> float:
    if denominator == 0:
        undefined.append(name)
        return 0.0
    return numerator / denominator


def metrics(matrix: ConfusionMatrix, model_id: str = "", config_hash: str = "",
            timing: float = 0.0) -> EvalReport:
    """Accuracy, P/R/F1 (positive = FAKE), and macro-F1 from one matrix.

    Ratios with a zero denominator are reported as 0 and named in
    ``undefined`` so the report schema stays fixed.
    """
    if matrix.total == 0:
        raise EmptyMatrixError("cannot compute metrics over an empty matrix")
    undefined: list[str] = []
    accuracy = (matrix.tp + matrix.tn) / matrix.total
    precision = _ratio(matrix.tp, matrix.tp + matrix.fp, "precision", undefined)
    recall = _ratio(matrix.tp, matrix.tp + matrix.fn, "recall", undefined)
    f1 = _f1(precision, recall, "f1", undefined)

    # Per-class F1 with LEGIT as positive mirrors (tp<->tn, fp<->fn).
    legit_undef: list[str] = []
    precision_legit = _ratio(matrix.tn, matrix.tn + matrix.fn, "precision", legit_undef)
    recall_legit = _ratio(matrix.tn, matrix.tn + matrix.fp, "recall", legit_undef)
    f1_legit = _f1(precision_legit, recall_legit, "f1", legit_undef)

    return EvalReport(
        matrix=matrix,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_f1=(f1 + f1_legit) / 2.0,
        undefined=undefined,
        model_id=model_id,
        config_hash=config_hash,
        timing=timing,
    )


def _f1(precision: float, recall: float, name: str, undefined: list[str]) -> float:
    if precision + recall == 0:
        undefined.append(name)
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def cross_dataset_eval(
    predict_labels: Callable[[Sequence[NewsRecord]], Sequence[Label]],
    records: Sequence[NewsRecord],
    sources: Sequence[str] | None = None,
    model_id: str = "",
    config_hash: str = "",
) -> EvalReport:
    """Evaluate per source_id plus pooled, with one shared pipeline.

    Returns the pooled report carrying the per-source breakdown; the pooled
    confusion matrix is the element-wise sum of the per-source matrices.
    """
    by_source: dict[str, list[NewsRecord]] = {}
    for record in records:
        by_source.setdefault(record.source_id, []).append(record)
    if sources is None:
        sources = sorted(by_source)
    else:
        missing = [s for s in sources if s not in by_source]
        if missing:
            raise UnknownSourceError(f"no records for source(s): {missing}")

    per_source: dict[str, EvalReport] = {}
    pooled_matrix = ConfusionMatrix(0, 0, 0, 0)
    for source in sources:
        subset = by_source[source]
        predictions = list(predict_labels(subset))
        matrix = confusion(predictions, [r.label for r in subset])
        per_source[source] = metrics(matrix, model_id=model_id, config_hash=config_hash)
        pooled_matrix = pooled_matrix + matrix

    pooled = metrics(pooled_matrix, model_id=model_id, config_hash=config_hash)
    pooled.per_source = per_source
    return pooled


# ---------------------------------------------------------------------------
# Human review loop

@dataclass
class Verdict:
    corrected_label: Label
    reviewer_id: str
    note: str = ""


@dataclass
class ReviewItem:
    item_id: str
    text: str
    gold: Label
    predicted: Label
    votes: dict[str, dict]
    expert_verdict: Verdict | None = None

    def to_json(self) -> str:
        payload = {
            "item_id": self.item_id,
            "text": self.text,
            "gold": self.gold.value,
            "predicted": self.predicted.value,
            "votes": self.votes,
            "expert_verdict": None
            if self.expert_verdict is None
            else {
                "corrected_label": self.expert_verdict.corrected_label.value,
                "reviewer_id": self.expert_verdict.reviewer_id,
                "note": self.expert_verdict.note,
            },
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ReviewItem":
        payload = json.loads(line)
        verdict = payload.get("expert_verdict")
        return cls(
            item_id=payload["item_id"],
            text=payload.get("text", ""),
            gold=Label(payload["gold"]),
            predicted=Label(payload["predicted"]),
            votes=dict(payload.get("votes", {})),
            expert_verdict=None
            if verdict is None
            else Verdict(
                corrected_label=Label(verdict["corrected_label"]),
                reviewer_id=str(verdict.get("reviewer_id", "")),
                note=str(verdict.get("note", "")),
            ),
        )


def export_review(
    votes: Sequence[VoteRecord],
    gold: Mapping[str, Label],
    texts: Mapping[str, str] | None = None,
) -> list[ReviewItem]:
    """Misclassified items only, ready for expert annotation."""
    texts = texts or {}
    items = []
    for vote in votes:
        actual = gold.get(vote.item_id)
        if actual is None:
            raise UnknownItemIdError(f"no gold label for item {vote.item_id!r}")
        if vote.decision is actual:
            continue
        items.append(
            ReviewItem(
                item_id=vote.item_id,
                text=texts.get(vote.item_id, ""),
                gold=actual,
                predicted=vote.decision,
                votes={
                    pid: {
                        "legit": out.probs[Label.LEGIT],
                        "fake": out.probs[Label.FAKE],
                        "predicted": out.predicted.value,
                    }
                    for pid, out in sorted(vote.outputs.items())
                },
            )
        )
    return items


def import_review(
    review_items: Sequence[ReviewItem],
    predictions: Mapping[str, Label],
    gold: Mapping[str, Label],
    model_id: str = "",
) -> tuple[dict[str, Verdict], EvalReport, EvalReport]:
    """Apply expert verdicts and recompute metrics under corrected gold labels.

    Returns (verdicts, original report, amended report). Verdicts must name
    exported (misclassified) items; conflicting corrections for one item fail.
    """
    exported_ids = set()
    verdicts: dict[str, Verdict] = {}
    for item in review_items:
        if item.item_id not in predictions or item.item_id not in gold:
            raise UnknownItemIdError(f"review item {item.item_id!r} is not in the run")
        if predictions[item.item_id] is gold[item.item_id]:
            raise UnknownItemIdError(
                f"review item {item.item_id!r} was not misclassified in this run"
            )
        exported_ids.add(item.item_id)
        if item.expert_verdict is None:
            continue
        existing = verdicts.get(item.item_id)
        if existing is not None and existing.corrected_label is not item.expert_verdict.corrected_label:
            raise ConflictingVerdictsError(
                f"item {item.item_id!r} has conflicting corrections"
            )
        verdicts[item.item_id] = item.expert_verdict

    ordered_ids = sorted(predictions)
    original_gold = [gold[i] for i in ordered_ids]
    amended_gold = [
        verdicts[i].corrected_label if i in verdicts else gold[i] for i in ordered_ids
    ]
    predicted = [predictions[i] for i in ordered_ids]
    original = metrics(confusion(predicted, original_gold), model_id=model_id)
    amended = metrics(confusion(predicted, amended_gold), model_id=model_id)
    return verdicts, original, amended


def write_review(items: Iterable[ReviewItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in items:
            fh.write(item.to_json() + "\n")


def read_review(path: str | Path) -> list[ReviewItem]:
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                items.append(ReviewItem.from_json(line))
    return items


_TSV_COLUMNS = ("item_id", "gold", "predicted", "verdict_label", "reviewer_id", "note", "text")


def review_to_tsv(items: Sequence[ReviewItem], path: str | Path) -> None:
    """Spreadsheet-friendly projection; tabs/newlines in text become spaces."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(_TSV_COLUMNS) + "\n")
        for item in items:
            verdict = item.expert_verdict
            row = (
                item.item_id,
                item.gold.value,
                item.predicted.value,
                verdict.corrected_label.value if verdict else "",
                verdict.reviewer_id if verdict else "",
                (verdict.note if verdict else "").replace("\t", " ").replace("\n", " "),
                item.text.replace("\t", " ").replace("\n", " "),
            )
            fh.write("\t".join(row) + "\n")


def review_from_tsv(path: str | Path) -> list[ReviewItem]:
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header != list(_TSV_COLUMNS):
            raise DataError(f"unexpected review TSV header: {header}")
        for line in fh:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t", len(_TSV_COLUMNS) - 1)
            item_id, gold, predicted, verdict_label, reviewer, note, text = parts
            verdict = None
            if verdict_label:
                verdict = Verdict(Label(verdict_label), reviewer, note)
            items.append(
                ReviewItem(item_id, text, Label(gold), Label(predicted), {}, verdict)
            )
    return items


# ---------------------------------------------------------------------------
# Fixed-width text rendering

def render_report_table(reports: Mapping[str, EvalReport]) -> str:
    """Fixed-width comparison table; one column per model."""
    names = list(reports)
    rows = [
        ("Accuracy", [reports[n].accuracy for n in names]),
        ("Precision", [reports[n].precision for n in names]),
        ("Recall", [reports[n].recall for n in names]),
        ("F1-Score", [reports[n].f1 for n in names]),
        ("Macro-F1", [reports[n].macro_f1 for n in names]),
    ]
    width = max(12, *(len(n) + 2 for n in names)) if names else 12
    header = "Parameter".ljust(12) + "".join(n.rjust(width) for n in names)
    lines = [header, "-" * len(header)]
    for label, values in rows:
        lines.append(
            label.ljust(12) + "".join(f"{v:.3f}".rjust(width) for v in values)
        )
    return "\n".join(lines) + "\n"
