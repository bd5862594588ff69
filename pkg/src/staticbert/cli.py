"""Command-line entry point.

Subcommands: ``distill``, ``build-matrix``, ``balance``, ``kfold``,
``report``, ``gradcheck``. One ``--seed`` flag is the only randomness knob;
per-component streams derive from it by stable hashing. Commands that
produce files take ``--out <dir>`` and write nothing outside it; a run
manifest is written there before any computation starts. Environment
variables are never consulted, so the manifest plus flags replay a run
exactly. Outputs carry no timestamps: identical inputs and seed give
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (
    CorpusFormatError,
    balance_of_corpus,
    build_vocabulary,
    load_corpus,
)
from .distill import (
    EmbeddingFormatError,
    EmbeddingMatrix,
    StaticEmbeddingTable,
    build_matrix,
    concat_tables,
    distill_ceb,
    load_word_vectors,
    save_matrix,
    save_word_vectors,
)
from .engine import GradientCheckError, grad_check
from .evaluate import (
    METRIC_NAMES,
    RunSummary,
    TrainSchedule,
    comparison_report,
    read_metrics_file,
    read_resolved_config,
    run_kfold,
)
from .models import ARCHITECTURES, ModelConfig, build_model

BALANCE_DECIMALS = 3


def _write_manifest(out_dir: Path, subcommand: str, inputs: dict, settings: dict, seed: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "subcommand": subcommand,
        "inputs": inputs,
        "settings": settings,
        "seed": seed,
        "tool_version": __version__,
        "out_dir": str(out_dir),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_tables(paths: list[str]) -> StaticEmbeddingTable:
    tables = [load_word_vectors(p) for p in paths]
    table = tables[0]
    for other in tables[1:]:
        table = concat_tables(table, other)
    return table


def cmd_distill(args) -> int:
    out_dir = Path(args.out)
    _write_manifest(out_dir, "distill", {"ceb": args.ceb},
                    {"table_name": args.table_name}, seed=args.seed)
    try:
        table = distill_ceb(args.ceb)
    except (OSError, EmbeddingFormatError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    out_path = out_dir / args.table_name
    save_word_vectors(table, out_path)
    print(f"words: {len(table)}")
    print(f"dim: {table.dim}")
    print(f"table: {out_path}")
    return 0


def cmd_build_matrix(args) -> int:
    out_dir = Path(args.out)
    _write_manifest(out_dir, "build-matrix",
                    {"corpus": args.corpus, "tables": list(args.table)},
                    {"delimiter": args.delimiter, "label_threshold": args.label_threshold},
                    seed=args.seed)
    try:
        corpus = load_corpus(args.corpus, delimiter=args.delimiter,
                             label_threshold=args.label_threshold)
        vocab = build_vocabulary(corpus)
        table = _load_tables(args.table)
    except (OSError, CorpusFormatError, EmbeddingFormatError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    matrix = build_matrix(vocab, table, seed=args.seed)
    out_path = out_dir / "embedding-matrix.bin"
    save_matrix(matrix, out_path)
    cov = matrix.coverage
    print(f"rows: {matrix.rows.shape[0]}")
    print(f"dim: {matrix.dim}")
    print(f"coverage: found={cov.found} oov_resolved={cov.oov_resolved} fallback={cov.fallback}")
    print(f"matrix: {out_path}")
    return 0


def cmd_balance(args) -> int:
    try:
        corpus = load_corpus(args.corpus, delimiter=args.delimiter,
                             label_threshold=args.label_threshold)
        report = balance_of_corpus(corpus)
    except (OSError, CorpusFormatError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for label, count in enumerate(report.class_counts):
        print(f"class {label}: {count}")
    print(f"entropy: {report.entropy:.6f} nats")
    print(f"balance: {report.balance:.{BALANCE_DECIMALS}f}")
    return 0


def cmd_kfold(args) -> int:
    out_dir = Path(args.out)
    embedding_tag = args.embedding_tag or ("concat" if len(args.table) > 1 else "static_be")
    settings = {
        "architecture": args.arch, "embedding_tag": embedding_tag,
        "folds": args.folds, "max_len": args.max_len, "hidden": args.hidden,
        "attention_size": args.attention_size, "filters": args.filters,
        "conv_width": args.conv_width, "dropout": args.dropout,
        "trainable_embeddings": args.trainable_embeddings,
        "epochs": args.epochs, "batch_size": args.batch_size,
        "patience": args.patience, "learning_rate": args.lr,
        "delimiter": args.delimiter, "label_threshold": args.label_threshold,
        "jobs": args.jobs,
    }
    _write_manifest(out_dir, "kfold", {"corpus": args.corpus, "tables": list(args.table)},
                    settings, seed=args.seed)
    try:
        config = ModelConfig(
            architecture=args.arch,
            embedding_source=embedding_tag,
            max_len=args.max_len,
            hidden_size=args.hidden,
            attention_size=args.attention_size,
            conv_filters=args.filters,
            conv_width=args.conv_width,
            dropout=args.dropout,
            trainable_embeddings=args.trainable_embeddings,
            seed=args.seed,
        )
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    schedule = TrainSchedule(epochs=args.epochs, batch_size=args.batch_size,
                             patience=args.patience, learning_rate=args.lr, seed=args.seed)
    try:
        corpus = load_corpus(args.corpus, delimiter=args.delimiter,
                             label_threshold=args.label_threshold)
        vocab = build_vocabulary(corpus)
        table = _load_tables(args.table)
        matrix = build_matrix(vocab, table, seed=args.seed)
        aggregate = run_kfold(corpus, vocab, matrix, config, k=args.folds, seed=args.seed,
                              schedule=schedule, out_dir=out_dir, jobs=args.jobs)
    except (OSError, CorpusFormatError, EmbeddingFormatError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    run_name = f"{args.arch}+{embedding_tag}"
    report = comparison_report([RunSummary(name=run_name, architecture=args.arch,
                                           embedding=embedding_tag,
                                           metrics=aggregate.as_dict())])
    (out_dir / "report.md").write_text(report.to_markdown(), encoding="utf-8")
    (out_dir / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    row = " ".join(
        f"{name}={_fmt_metric(getattr(aggregate, name))}" for name in METRIC_NAMES
    )
    print(f"{run_name} (micro): {row}")
    return 0


def _fmt_metric(value) -> str:
    return "-" if value is None else f"{value:.2f}"


def cmd_report(args) -> int:
    out_dir = Path(args.out)
    _write_manifest(out_dir, "report", {"runs": list(args.run_dir)}, {}, seed=args.seed)
    runs = []
    schemas = set()
    for run_dir in args.run_dir:
        run_path = Path(run_dir)
        metrics_path = run_path / "aggregate-metrics"
        config_path = run_path / "resolved-config"
        if not metrics_path.is_file() or not config_path.is_file():
            print(f"error: {run_dir} is not a run directory "
                  f"(missing aggregate-metrics or resolved-config)", file=sys.stderr)
            return 1
        payload = read_metrics_file(metrics_path)
        config = read_resolved_config(config_path)
        metric_keys = tuple(sorted(k for k in payload if k in METRIC_NAMES))
        schemas.add(metric_keys)
        runs.append(RunSummary(
            name=run_path.name,
            architecture=config.get("architecture", "unknown"),
            embedding=config.get("embedding_source", "unknown"),
            metrics={name: payload.get(name) for name in METRIC_NAMES},
        ))
    if len(schemas) > 1:
        print(f"error: run directories report mismatched metric schemas: {sorted(schemas)}",
              file=sys.stderr)
        return 1
    report = comparison_report(runs)
    (out_dir / "report.md").write_text(report.to_markdown(), encoding="utf-8")
    (out_dir / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    print(report.to_markdown(), end="")
    return 0


def cmd_gradcheck(args) -> int:
    # Conv width cannot exceed the sequence, so tiny runs clamp it.
    conv_width = min(3, args.max_len)
    config = ModelConfig(
        architecture=args.arch, max_len=args.max_len, hidden_size=args.hidden,
        conv_filters=4, conv_width=conv_width, dropout=0.2, seed=args.seed,
    )
    rng = np.random.default_rng(args.seed)
    vocab_rows = 8
    matrix = EmbeddingMatrix(
        rows=np.vstack([np.zeros((1, args.emb_dim)),
                        rng.uniform(-0.5, 0.5, size=(vocab_rows - 1, args.emb_dim))]),
        dim=args.emb_dim, vocab_size=vocab_rows - 2, seed=args.seed,
    )
    model = build_model(config, matrix)
    T = args.max_len
    indices = rng.integers(2, vocab_rows, size=(2, T))
    if T > 1:
        indices[1, max(1, T - 2):] = 0  # exercise the padded path
    labels = np.array([1, 0])
    grad_hook = None
    if args.corrupt:
        def grad_hook(grads):
            name = next(iter(grads))
            grads[name] = grads[name] + 0.05 * (np.abs(grads[name]).max() + 1.0)
    try:
        err = grad_check(model, indices, labels, tolerance=args.tolerance,
                         train=True, rng_seed=args.seed, grad_hook=grad_hook)
    except GradientCheckError as failure:
        print(f"FAIL: {failure}")
        return 1
    print(f"max relative error: {err:.3e}")
    print("PASS")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="staticbert",
        description="Distill static word embeddings from contextual ones and "
                    "evaluate text classifiers under stratified k-fold cross-validation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_corpus_flags(p):
        p.add_argument("--corpus", required=True, help="delimited text file with a header row "
                                                       "and 'comment'/'isHate' columns")
        p.add_argument("--delimiter", default=";", help="column delimiter (default ';')")
        p.add_argument("--label-threshold", type=float, default=0.5, dest="label_threshold",
                       help="labels >= threshold map to class 1 (default 0.5)")

    p = sub.add_parser("distill", help="mean-pool a contextual embedding batch (CEB) file "
                                       "into a static word-vector table")
    p.add_argument("--ceb", required=True, help="CEB input file ('CEB 1 <dim>' header)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--table-name", default="static-table.txt", dest="table_name",
                   help="output table filename (default static-table.txt)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("build-matrix", help="assemble the vocabulary-aligned embedding matrix "
                                            "and dump it in binary form")
    add_corpus_flags(p)
    p.add_argument("--table", action="append", required=True,
                   help="word-vector text file; give twice to concatenate per word")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_build_matrix)

    p = sub.add_parser("balance", help="print class counts, entropy and the "
                                       "normalized-entropy balance of a corpus")
    add_corpus_flags(p)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("kfold", help="train and evaluate one architecture under "
                                     "stratified k-fold cross-validation")
    add_corpus_flags(p)
    p.add_argument("--table", action="append", required=True,
                   help="word-vector text file; give twice to concatenate per word")
    p.add_argument("--arch", required=True, choices=ARCHITECTURES)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-len", type=int, default=64, dest="max_len",
                   help="sequence length; longer sentences are truncated (default 64)")
    p.add_argument("--hidden", type=int, default=None,
                   help="recurrent units (defaults: 128 for lstm/gru, 64 otherwise)")
    p.add_argument("--attention-size", type=int, default=None, dest="attention_size")
    p.add_argument("--filters", type=int, default=64, help="conv filters (default 64)")
    p.add_argument("--conv-width", type=int, default=3, dest="conv_width")
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--trainable-embeddings", action="store_true", dest="trainable_embeddings",
                   help="let gradients update the embedding matrix (off by default)")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel folds (default 1 for bit-stable logs)")
    p.add_argument("--embedding-tag", choices=("static_be", "word_vectors", "concat"),
                   default=None, dest="embedding_tag",
                   help="embedding source tag for pairing in reports "
                        "(default: static_be, or concat for two tables)")
    p.set_defaults(func=cmd_kfold)

    p = sub.add_parser("report", help="render a comparison table over run directories")
    p.add_argument("run_dir", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("gradcheck", help="finite-difference check of one architecture's "
                                         "gradients at tiny sizes")
    p.add_argument("--arch", required=True, choices=ARCHITECTURES)
    p.add_argument("--max-len", type=int, default=6, dest="max_len")
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--emb-dim", type=int, default=6, dest="emb_dim")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
