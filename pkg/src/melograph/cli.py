"""Command-line entry point: ``melograph <stage> --config run.yaml``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .config import ConfigError, load_config
from .errors import MelographError
from .pipeline import STAGES, RunDir, report, run_all, run_stage
from .synth import generate_corpus, write_corpus


def _synth(args) -> int:
    pieces = generate_corpus(args.pieces, args.styles, seed=args.seed, phrases=args.phrases)
    manifest = write_corpus(pieces, args.out)
    print(manifest)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="melograph", description="Segment-graph analysis of melodies.")
    parser.add_argument("--version", action="version", version=f"melograph {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in (*STAGES, "all"):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "all" else "run every stage in order")
        p.add_argument("--config", required=True, help="pipeline YAML config")
        p.add_argument("--force", action="store_true", help="recompute even if the cached output is current")

    p = sub.add_parser("report", help="summarise a finished run")
    p.add_argument("--config", required=True)

    p = sub.add_parser("synth", help="write a synthetic corpus with planted styles")
    p.add_argument("--pieces", type=int, default=10)
    p.add_argument("--styles", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phrases", type=int, default=24, help="phrases per piece")
    p.add_argument("--out", required=True, help="output directory for scores and manifest.yaml")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return _synth(args)
        config = load_config(args.config)
        if args.command == "report":
            report(config)
            print((RunDir(config).stage("report") / "summary.txt").read_text(), end="")
        elif args.command == "all":
            print(json.dumps(run_all(config, args.force), indent=1))
        else:
            print(f"{args.command}: {run_stage(config, args.command, args.force)}")
    except (MelographError, ConfigError, FileNotFoundError) as err:
        print(f"melograph: error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
