"""Command line for the scorer service: build a toy backbone, fine-tune, serve."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .backbones import BackboneUnavailable, FineTuneConfig, make_toy_backbone
from .data import read_training_export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scorer-service")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("make-toy-backbone", parents=[common],
                            help="materialize a tiny random-init backbone from a corpus")
    p.add_argument("--corpus", type=Path, required=True,
                   help="line-delimited corpus export providing the vocabulary")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--vocab-cap", type=int, default=2000)
    p.add_argument("--hidden-size", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--max-seq-len", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    p = commands.add_parser("fine-tune", parents=[common],
                            help="train the classification head")
    p.add_argument("--model", required=True,
                   help="backbone name or local backbone directory")
    p.add_argument("--train", type=Path, required=True,
                   help="line-delimited corpus export")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=2e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-examples", type=int, default=1000)

    p = commands.add_parser("serve", parents=[common],
                            help="serve a checkpoint over protocol 1.0")
    p.add_argument("--model", type=Path, required=True,
                   help="fine-tuned checkpoint directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7070)
    p.add_argument("--max-batch", type=int, default=32)
    p.add_argument("--model-name", default=None)
    p.add_argument("--seed", type=int, default=0,
                   help="recorded for reproducibility; inference runs in eval mode")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "make-toy-backbone":
            texts, _ = read_training_export(args.corpus)
            out = make_toy_backbone(
                texts, args.out, vocab_cap=args.vocab_cap,
                hidden_size=args.hidden_size, num_layers=args.layers,
                num_heads=args.heads, max_sequence_length=args.max_seq_len,
                seed=args.seed,
            )
            print(f"toy backbone written to {out}")
            return 0
        if args.command == "fine-tune":
            from .finetune import fine_tune

            config = FineTuneConfig(
                epochs=args.epochs, batch_size=args.batch_size,
                learning_rate=args.learning_rate, seed=args.seed,
                max_examples=args.max_examples,
            )
            result = fine_tune(args.model, args.train, args.out, config)
            print(f"checkpoint written to {result.checkpoint_dir} "
                  f"(final loss {result.epoch_loss[-1]:.5f}, "
                  f"{result.truncated} truncated)")
            return 0
        if args.command == "serve":
            from .server import ScorerServer

            server = ScorerServer(
                args.model, host=args.host, port=args.port,
                max_batch=args.max_batch, model_name=args.model_name,
            )
            print(f"serving on {server.address}", flush=True)
            server.serve_forever()
            return 0
        raise AssertionError(args.command)
    except (BackboneUnavailable, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
