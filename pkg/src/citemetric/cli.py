"""Command line interface: ``citemetric <stage> MANIFEST``.

Exit codes: 0 success, 2 invalid manifest or usage, 3 data error, 4 I/O error.
Errors are reported as one JSON object on a single stderr line.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .model import CitemetricError
from .synthetic import SyntheticConfig, generate

EXIT_MANIFEST = 2
EXIT_DATA = 3
EXIT_IO = 4


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "exit": code, "message": message}), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="citemetric", description="Citation indicator engine and evaluation harness")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in (*pipeline.STAGES, "all"):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "all" else "run every stage in order")
        p.add_argument("manifest", type=Path, help="run manifest (TOML)")
        p.add_argument("--threads", type=int, help="worker threads (overrides the manifest)")
        p.add_argument("--output-dir", type=Path, help="output directory (overrides the manifest)")
        p.add_argument("--dry-run", action="store_true", help="validate the manifest without reading data")

    g = sub.add_parser("gen-synthetic", help="write a seeded synthetic corpus and manifest")
    g.add_argument("out", type=Path)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--articles", type=int, default=1000)
    g.add_argument("--groups", type=int, default=34)
    g.add_argument("--year-min", type=int, default=2014)
    g.add_argument("--year-max", type=int, default=2020)
    g.add_argument("--max-gold", type=int, default=100_000)

    f = sub.add_parser("fetch", help="look up one work by DOI in the OpenAlex API")
    f.add_argument("doi")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        if args.command == "gen-synthetic":
            cfg = SyntheticConfig(n_articles=args.articles, seed=args.seed, n_groups=args.groups,
                                  year_min=args.year_min, year_max=args.year_max, max_gold=args.max_gold)
            paths = generate(cfg, args.out)
            print(paths.manifest)
            return 0
        if args.command == "fetch":
            from .fetch import fetch_work_by_doi

            print(json.dumps(fetch_work_by_doi(args.doi), sort_keys=True))
            return 0

        manifest = pipeline.load_manifest(args.manifest)
        if args.threads is not None:
            manifest = dataclasses.replace(manifest, threads=args.threads)
        if args.output_dir is not None:
            manifest = dataclasses.replace(manifest, output_dir=args.output_dir.resolve())
        stages = manifest.stages if args.command == "all" else (args.command,)
        pipeline.run(manifest, stages, dry_run=args.dry_run)
        return 0
    except pipeline.ManifestError as exc:
        return _fail(EXIT_MANIFEST, "invalid_manifest", str(exc))
    except (CitemetricError, ValueError) as exc:
        return _fail(EXIT_DATA, "data_error", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io_error", str(exc))


if __name__ == "__main__":
    sys.exit(main())
