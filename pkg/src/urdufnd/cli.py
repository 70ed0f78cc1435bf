"""Command-line entry point wiring the pipeline end to end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 scorer/protocol error.
Every subcommand writes a run manifest into --out-dir.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, corpus, ensemble, evaluate, features, harmonize, preprocess
from . import classifiers
from .errors import DataError, ProtocolError, UrduFndError
from .manifest import RunManifest, config_hash
from .scorer_bridge import ScorerClient, ScorerEndpoint

log = logging.getLogger("urdufnd")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROTOCOL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1, not argparse's default 2
        raise UsageError(message)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None,
                     help="run seed (falls back to LUND_SEED, then 0)")
    sub.add_argument("--config", type=Path, default=None,
                     help="JSON config with per-stage sections")
    sub.add_argument("--out-dir", type=Path, default=Path("."))
    sub.add_argument("--log-level", default="warning",
                     choices=["debug", "info", "warning", "error"])
    sub.add_argument("--jobs", type=int, default=1,
                     help="worker bound for scorer fan-out")


def build_parser() -> _Parser:
    parser = _Parser(prog="urdufnd",
                     description="Urdu fake-news corpus and classifier toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("harmonize", parents=[], help="ingest, fuse, dedup, balance, split")
    p.add_argument("--manifest", type=Path, action="append", required=True,
                   help="source manifest JSON (repeatable); its 'path' key names the payload")
    p.add_argument("--train-ratio", type=float, default=None)
    p.add_argument("--max-per-domain", type=int, default=None)
    p.add_argument("--use-minhash", action="store_true")
    _add_common(p)

    p = commands.add_parser("stats", help="corpus statistics and top-term tables")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--top-k", type=int, default=50)
    _add_common(p)

    p = commands.add_parser("preprocess", help="emit the tokenized corpus")
    p.add_argument("--corpus", type=Path, required=True)
    _add_common(p)

    p = commands.add_parser("train", help="train one classical model")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--split", type=Path, default=None)
    p.add_argument("--algorithm", required=True,
                   choices=[a.value for a in classifiers.Algorithm])
    p.add_argument("--model-out", type=Path, default=None)
    _add_common(p)

    p = commands.add_parser("predict", help="score a corpus with one model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--vocab", type=Path, required=True)
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--split", type=Path, default=None)
    p.add_argument("--subset", default="test", choices=["train", "test", "all"])
    _add_common(p)

    p = commands.add_parser("ensemble", help="majority-vote several predictors")
    p.add_argument("--ensemble-config", type=Path, required=True,
                   help="JSON listing predictor ids, kinds, paths/endpoints")
    p.add_argument("--vocab", type=Path, required=True)
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--split", type=Path, default=None)
    p.add_argument("--subset", default="test", choices=["train", "test", "all"])
    _add_common(p)

    p = commands.add_parser("evaluate", help="confusion metrics for stored predictions")
    p.add_argument("--predictions", type=Path, required=True,
                   help="predictions or votes line-delimited JSON")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--split", type=Path, default=None)
    p.add_argument("--subset", default="test", choices=["train", "test", "all"])
    p.add_argument("--per-source", action="store_true")
    p.add_argument("--model-id", default="model")
    _add_common(p)

    p = commands.add_parser("export-review", help="export misclassified items for experts")
    p.add_argument("--votes", type=Path, required=True)
    p.add_argument("--corpus", type=Path, required=True)
    _add_common(p)

    p = commands.add_parser("import-review", help="apply expert verdicts, amend metrics")
    p.add_argument("--review", type=Path, required=True)
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--model-id", default="model")
    _add_common(p)

    p = commands.add_parser("serve-check", help="ping a scorer endpoint")
    p.add_argument("--address", required=True)
    p.add_argument("--timeout-ms", type=int, default=5000)
    _add_common(p)

    return parser


# ---------------------------------------------------------------------------
# Config plumbing

def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(path.read_text("utf-8-sig"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {path}: {exc}") from None


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("LUND_SEED")
    return int(env) if env else 0


def _preprocess_config(config: dict) -> preprocess.PreprocessConfig:
    section = dict(config.get("preprocess", {}))
    stoplist = (
        preprocess.load_stoplist(section["stoplist"])
        if "stoplist" in section
        else preprocess.default_stoplist()
    )
    suffixes = (
        preprocess.load_suffix_table(section["suffixes"])
        if "suffixes" in section
        else preprocess.default_suffix_table()
    )
    return preprocess.PreprocessConfig(
        stoplist=stoplist,
        suffix_table=suffixes,
        strip_urls=section.get("strip_urls", True),
        strip_ips=section.get("strip_ips", True),
        keep_question_mark=section.get("keep_question_mark", True),
        strip_diacritics=section.get("strip_diacritics", False),
    )


def _feature_config(config: dict) -> features.FeatureConfig:
    section = dict(config.get("features", {}))
    char_range = section.get("char_ngram_range")
    return features.FeatureConfig(
        word_ngram_range=tuple(section.get("word_ngram_range", (1, 2))),
        char_ngram_range=tuple(char_range) if char_range else None,
        min_df=section.get("min_df", 2),
        max_features=section.get("max_features", 50000),
        weighting=features.Weighting(section.get("weighting", "tfidf")),
        include_sentiment=section.get("include_sentiment", False),
        include_lexical_stats=section.get("include_lexical_stats", False),
    )


def _lexicon(config: dict):
    section = dict(config.get("features", {}))
    if "sentiment_lexicon" in section:
        return features.load_sentiment_lexicon(section["sentiment_lexicon"])
    return features.default_sentiment_lexicon()


def _train_config(config: dict, algorithm: str, seed: int) -> classifiers.TrainConfig:
    section = dict(config.get("train", {}))
    section.pop("algorithm", None)
    return classifiers.TrainConfig(
        algorithm=classifiers.Algorithm(algorithm), seed=seed, **section
    )


def _pipeline(config: dict, vocabulary: features.Vocabulary) -> features.TextPipeline:
    return features.TextPipeline(
        preprocess_config=_preprocess_config(config),
        vocabulary=vocabulary,
        feature_config=_feature_config(config),
        lexicon=_lexicon(config),
    )


def _subset_records(records, split_path: Path | None, subset: str):
    if split_path is None or subset == "all":
        return records
    spec = harmonize.SplitSpec.load(split_path)
    train, test = harmonize.split_records(records, spec)
    return train if subset == "train" else test


def _read_predictions(path: Path) -> dict[str, corpus.Label]:
    predictions: dict[str, corpus.Label] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            item_id = payload.get("item_id") or payload.get("id")
            verdict = payload.get("decision") or payload.get("predicted")
            if item_id is None or verdict is None:
                raise DataError(f"{path}:{lineno}: needs id and predicted/decision keys")
            predictions[str(item_id)] = corpus.Label(verdict)
    return predictions


# ---------------------------------------------------------------------------
# Subcommands

def _cmd_harmonize(args, config, manifest: RunManifest) -> None:
    out: Path = args.out_dir
    ingested = []
    for manifest_path in args.manifest:
        manifest.add_input(manifest_path)
        source = harmonize.SourceManifest.load(manifest_path)
        payload_path = json.loads(Path(manifest_path).read_text("utf-8-sig")).get("path")
        if payload_path is None:
            raise DataError(f"manifest {manifest_path} has no 'path' to its payload")
        payload_file = Path(manifest_path).parent / payload_path
        manifest.add_input(payload_file)
        result = harmonize.ingest_source(source, payload_file.read_bytes())
        log.info("ingested %d records from %s (%d dropped)",
                 len(result.records), source.source_id, result.dropped)
        ingested.append(result.records)

    dedup_section = dict(config.get("dedup", {}))
    records, report = harmonize.fuse(
        ingested,
        shingle_size=dedup_section.get("shingle_size", 5),
        threshold=dedup_section.get("threshold", 0.9),
        use_minhash=args.use_minhash or dedup_section.get("use_minhash", False),
    )

    max_per_domain = args.max_per_domain
    balance_section = dict(config.get("balance", {}))
    if max_per_domain is None:
        max_per_domain = balance_section.get("max_per_domain")
    targets = balance_section.get("targets")
    if max_per_domain is not None or targets:
        policy = harmonize.BalancePolicy(max_per_domain=max_per_domain, targets=targets)
        records = harmonize.balance_domains(records, policy, manifest.seed)

    corpus_path = out / "corpus.jsonl"
    corpus.write_corpus(records, corpus_path)
    manifest.add_output(corpus_path)

    report_path = out / "dedup_report.json"
    report_path.write_text(report.to_json() + "\n", encoding="utf-8")
    manifest.add_output(report_path)

    ratio = args.train_ratio
    if ratio is None:
        ratio = config.get("split", {}).get("train_ratio")
    if ratio is not None:
        spec = harmonize.stratified_split(records, ratio, manifest.seed)
        split_path = out / "split.json"
        split_path.write_text(spec.to_json() + "\n", encoding="utf-8")
        manifest.add_output(split_path)


def _cmd_stats(args, config, manifest: RunManifest) -> None:
    manifest.add_input(args.corpus)
    records = corpus.read_corpus(args.corpus)
    pp = _preprocess_config(config)
    stats = corpus.compute_stats(records, stoplist=pp.stoplist, top_k=args.top_k)
    stats_path = args.out_dir / "stats.json"
    stats_path.write_text(corpus.stats_to_json(stats) + "\n", encoding="utf-8")
    manifest.add_output(stats_path)
    for label in corpus.LABEL_ORDER:
        tsv_path = args.out_dir / f"top_terms_{label.value}.tsv"
        corpus.write_top_terms_tsv(stats.top_terms[label.value], tsv_path)
        manifest.add_output(tsv_path)
    print(json.dumps({"total": stats.total, "per_label": stats.per_label,
                      "total_words": stats.total_words}, ensure_ascii=False))


def _cmd_preprocess(args, config, manifest: RunManifest) -> None:
    manifest.add_input(args.corpus)
    records = corpus.read_corpus(args.corpus)
    pp = _preprocess_config(config)
    tokens_path = args.out_dir / "tokens.jsonl"
    with open(tokens_path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            tokens = list(preprocess.preprocess_text(record.text, pp))
            fh.write(json.dumps({"id": record.id, "tokens": tokens},
                                ensure_ascii=False) + "\n")
    manifest.add_output(tokens_path)


def _cmd_train(args, config, manifest: RunManifest) -> None:
    manifest.add_input(args.corpus)
    records = corpus.read_corpus(args.corpus)
    records = _subset_records(records, args.split, "train")
    if args.split:
        manifest.add_input(args.split)
    if not records:
        raise DataError("no training records after split selection")

    pp = _preprocess_config(config)
    feature_config = _feature_config(config)
    token_lists = [preprocess.preprocess_text(r.text, pp) for r in records]
    vocabulary = features.build_vocabulary(token_lists, feature_config)
    lexicon = _lexicon(config)
    vectors = [features.vectorize(t, vocabulary, feature_config, lexicon)
               for t in token_lists]
    dataset = classifiers.Dataset(
        vectors=vectors,
        labels=[r.label for r in records],
        dimension=features.feature_dimension(vocabulary, feature_config),
        vocabulary_hash=vocabulary.hash(),
    )
    train_config = _train_config(config, args.algorithm, manifest.seed)
    model = classifiers.train(dataset, train_config)

    vocab_path = args.out_dir / "vocabulary.tsv"
    vocabulary.save_tsv(vocab_path)
    manifest.add_output(vocab_path)
    model_path = args.model_out or args.out_dir / f"model_{args.algorithm}.bin"
    classifiers.save_model(model, model_path)
    manifest.add_output(model_path)
    manifest.config_hashes["train"] = config_hash(train_config.to_dict())


def _cmd_predict(args, config, manifest: RunManifest) -> None:
    for p in (args.model, args.vocab, args.corpus):
        manifest.add_input(p)
    model = classifiers.load_model(args.model)
    vocabulary = features.Vocabulary.load_tsv(args.vocab)
    records = _subset_records(corpus.read_corpus(args.corpus), args.split, args.subset)
    if not records:
        raise DataError("no records selected for prediction")
    pipeline = _pipeline(config, vocabulary)
    vectors = [pipeline.vectorize(r.text) for r in records]
    outputs = classifiers.predict_batch(model, vectors, vocabulary.hash())

    predictions_path = args.out_dir / f"predictions_{model.algorithm.value}.jsonl"
    with open(predictions_path, "w", encoding="utf-8", newline="\n") as fh:
        for record, output in zip(records, outputs):
            fh.write(json.dumps(
                {
                    "id": record.id,
                    "predicted": output.predicted.value,
                    "legit": output.probs[corpus.Label.LEGIT],
                    "fake": output.probs[corpus.Label.FAKE],
                },
                ensure_ascii=False, sort_keys=True,
            ) + "\n")
    manifest.add_output(predictions_path)


def _cmd_ensemble(args, config, manifest: RunManifest) -> None:
    manifest.add_input(args.ensemble_config)
    ensemble_spec = json.loads(args.ensemble_config.read_text("utf-8-sig"))
    vocabulary = features.Vocabulary.load_tsv(args.vocab)
    records = _subset_records(corpus.read_corpus(args.corpus), args.split, args.subset)
    if not records:
        raise DataError("no records selected for the ensemble run")
    pipeline = _pipeline(config, vocabulary)

    predictors: list[ensemble.Predictor] = []
    clients: list[ScorerClient] = []
    base_dir = args.ensemble_config.parent
    try:
        for entry in ensemble_spec.get("predictors", []):
            kind = ensemble.PredictorKind(entry["kind"])
            if kind is ensemble.PredictorKind.IN_PROCESS_MODEL:
                handle = classifiers.load_model(base_dir / entry["path"])
            else:
                endpoint = ScorerEndpoint(
                    address=entry["address"],
                    timeout_ms=entry.get("timeout_ms", 5000),
                    max_in_flight=entry.get("max_in_flight", 1),
                )
                client = ScorerClient(endpoint)
                clients.append(client)
                handle = client
            predictors.append(ensemble.Predictor(entry["id"], kind, handle))
        if not predictors:
            raise DataError("ensemble config lists no predictors")
        votes = ensemble.run_ensemble(predictors, records, pipeline,
                                      jobs=ensemble_spec.get("fan_out", args.jobs))
    finally:
        for client in clients:
            client.close()

    votes_path = args.out_dir / "votes.jsonl"
    ensemble.write_votes(votes, votes_path)
    manifest.add_output(votes_path)


def _cmd_evaluate(args, config, manifest: RunManifest) -> None:
    manifest.add_input(args.predictions)
    manifest.add_input(args.corpus)
    predictions = _read_predictions(args.predictions)
    records = _subset_records(corpus.read_corpus(args.corpus), args.split, args.subset)
    scored = [r for r in records if r.id in predictions]
    if len(scored) != len(records):
        log.warning("%d records have no stored prediction and are skipped",
                    len(records) - len(scored))
    if not scored:
        raise DataError("no overlap between predictions and selected records")

    if args.per_source:
        report = evaluate.cross_dataset_eval(
            lambda subset: [predictions[r.id] for r in subset],
            scored,
            model_id=args.model_id,
        )
    else:
        matrix = evaluate.confusion([predictions[r.id] for r in scored],
                                    [r.label for r in scored])
        report = evaluate.metrics(matrix, model_id=args.model_id)

    report_path = args.out_dir / "report.json"
    report_path.write_text(report.to_json() + "\n", encoding="utf-8")
    manifest.add_output(report_path)
    table_path = args.out_dir / "report.txt"
    table_path.write_text(evaluate.render_report_table({args.model_id: report}),
                          encoding="utf-8")
    manifest.add_output(table_path)
    print(json.dumps({"accuracy": report.accuracy, "f1": report.f1},
                     ensure_ascii=False))


def _cmd_export_review(args, config, manifest: RunManifest) -> None:
    manifest.add_input(args.votes)
    manifest.add_input(args.corpus)
    votes = ensemble.read_votes(args.votes)
    records = corpus.read_corpus(args.corpus)
    gold = {r.id: r.label for r in records}
    texts = {r.id: r.text for r in records}
    items = evaluate.export_review(votes, gold, texts)
    review_path = args.out_dir / "review.jsonl"
    evaluate.write_review(items, review_path)
    manifest.add_output(review_path)
    tsv_path = args.out_dir / "review.tsv"
    evaluate.review_to_tsv(items, tsv_path)
    manifest.add_output(tsv_path)


def _cmd_import_review(args, config, manifest: RunManifest) -> None:
    for p in (args.review, args.predictions, args.corpus):
        manifest.add_input(p)
    if args.review.suffix == ".tsv":
        items = evaluate.review_from_tsv(args.review)
    else:
        items = evaluate.read_review(args.review)
    predictions = _read_predictions(args.predictions)
    gold = {r.id: r.label for r in corpus.read_corpus(args.corpus)}
    gold = {i: gold[i] for i in predictions if i in gold}
    verdicts, original, amended = evaluate.import_review(
        items, predictions, gold, model_id=args.model_id
    )
    payload = {
        "verdicts_applied": len(verdicts),
        "original": original.to_dict(),
        "amended": amended.to_dict(),
    }
    amended_path = args.out_dir / "amended_report.json"
    amended_path.write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    manifest.add_output(amended_path)


def _cmd_serve_check(args, config, manifest: RunManifest) -> None:
    endpoint = ScorerEndpoint(args.address, timeout_ms=args.timeout_ms)
    from .scorer_bridge import handshake

    capabilities = handshake(endpoint)
    print(json.dumps({
        "model_name": capabilities.model_name,
        "protocol_version": capabilities.protocol_version,
        "max_batch": capabilities.max_batch,
    }, ensure_ascii=False))


_COMMANDS = {
    "harmonize": _cmd_harmonize,
    "stats": _cmd_stats,
    "preprocess": _cmd_preprocess,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "ensemble": _cmd_ensemble,
    "evaluate": _cmd_evaluate,
    "export-review": _cmd_export_review,
    "import-review": _cmd_import_review,
    "serve-check": _cmd_serve_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load_config(args.config)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(
            subcommand=args.command,
            seed=_seed(args),
            tool_version=__version__,
        )
        for stage in ("preprocess", "features", "train", "dedup", "balance", "split"):
            if stage in config:
                manifest.config_hashes[stage] = config_hash(config[stage])
        _COMMANDS[args.command](args, config, manifest)
        manifest.write(args.out_dir / f"manifest_{args.command}.json")
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProtocolError as exc:
        print(f"scorer error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (DataError, UrduFndError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
