"""``ceb-extract`` command line: run an extraction, or verify a CEB file."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .extract import extract
from .manifest import ExtractionManifest
from .verify import verify_ceb

# An extraction with more than this fraction of unresolvable words is
# treated as a failed run.
MAX_SKIP_RATE = 0.01


def cmd_run(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = ExtractionManifest(
        model=args.model,
        corpus_path=str(args.corpus),
        layer=args.layer,
        batch_size=args.batch_size,
    )
    ceb_path = out_dir / args.ceb_name
    debug_path = out_dir / "debug-pieces.jsonl" if args.debug_dump else None
    try:
        summary = extract(args.corpus, ceb_path, manifest,
                          delimiter=args.delimiter, debug_dump_path=debug_path)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    manifest = ExtractionManifest(
        model=manifest.model, corpus_path=manifest.corpus_path,
        layer=manifest.layer, batch_size=manifest.batch_size, dim=summary.dim,
    )
    manifest.write(out_dir / "extraction-manifest.json")
    print(f"sentences: {summary.sentences}")
    print(f"occurrences: {summary.occurrences}")
    print(f"vocabulary: {summary.vocabulary}")
    print(f"skipped words: {summary.skipped_words}")
    print(f"dim: {summary.dim}")
    print(f"ceb: {ceb_path}")
    if summary.skip_rate > MAX_SKIP_RATE:
        print(f"error: skip rate {summary.skip_rate:.2%} exceeds {MAX_SKIP_RATE:.0%}",
              file=sys.stderr)
        return 1
    return 0


def cmd_verify(args) -> int:
    report = verify_ceb(args.ceb)
    print(report.summary())
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ceb-extract",
        description="Export contextual encoder embeddings as CEB, or validate a CEB file.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="extract contextual embeddings for a corpus")
    p.add_argument("--corpus", required=True,
                   help="delimited text file with a 'comment' column")
    p.add_argument("--model", required=True,
                   help="pretrained model: local directory or cached hub name")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--layer", type=int, default=-1,
                   help="hidden-state index; -1 = final encoder layer (default)")
    p.add_argument("--batch-size", type=int, default=8, dest="batch_size")
    p.add_argument("--delimiter", default=";")
    p.add_argument("--ceb-name", default="corpus.ceb", dest="ceb_name")
    p.add_argument("--debug-dump", action="store_true", dest="debug_dump",
                   help="also write per-occurrence piece vectors (debug-pieces.jsonl)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="validate a CEB file")
    p.add_argument("--ceb", required=True)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
