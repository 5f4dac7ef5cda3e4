"""Command line front end.

Exit codes: 0 no check failed, 1 a check failed, 2 bad config or usage,
3 the source (catalog id or DSL file) cannot be loaded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .catalog import STANDARD_IDS, CatalogError, from_id, list_kinds
from .config import ConfigError, load_config, parse_checks, parse_grid
from .verify import SourceError, render_table, run_verification, to_json

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOURCE = 0, 1, 2, 3


def _step(text: str):
    if text == "auto":
        return "auto"
    try:
        h = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number or 'auto', got {text!r}") from None
    if not h > 0:
        raise argparse.ArgumentTypeError("step must be positive")
    return h


def _grid(text: str):
    try:
        return parse_grid(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _workers(text: str) -> int:
    k = int(text)
    if k < 1:
        raise argparse.ArgumentTypeError("workers must be at least 1")
    return k


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmcv",
        description="Verify biharmonicity and pmc identities of submanifolds of S^n(c) x R.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run checks described by a config file")
    v.add_argument("--config", required=True, help="YAML verification config")
    v.add_argument("--grid", type=_grid, help="sample counts per chart axis, e.g. 32x32")
    v.add_argument("--step", type=_step, help="finite-difference step, or 'auto'")
    v.add_argument("--checks", help="comma-separated subset of checks")
    v.add_argument("--points", action="store_true", help="include per-point records in the report")
    v.add_argument("--workers", type=_workers, default=1, help="worker processes (default 1)")
    v.add_argument("--out", help="machine report path (overrides the config)")

    c = sub.add_parser("catalog", help="inspect the built-in examples")
    csub = c.add_subparsers(dest="catalog_command", required=True)
    csub.add_parser("list", help="list standard catalog ids")
    show = csub.add_parser("show", help="print an entry's immersion and expected values")
    show.add_argument("id")
    return parser


def _cmd_verify(args) -> int:
    try:
        cfg = load_config(args.config)
        seed = os.environ.get("PMCV_SEED")
        cfg = cfg.override(
            grid=args.grid,
            fd_step=args.step,
            checks=None if args.checks is None else parse_checks(args.checks),
            out=args.out,
            seed=None if seed is None else int(seed),
        )
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_verification(cfg, workers=args.workers, points=args.points)
    except SourceError as exc:
        print(f"source error: {exc}", file=sys.stderr)
        return EXIT_SOURCE
    sys.stdout.write(render_table(report))
    if cfg.out:
        try:
            Path(cfg.out).write_text(to_json(report), encoding="utf-8")
        except OSError as exc:
            print(f"cannot write report: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    return EXIT_FAIL if report.failed else EXIT_OK


def _cmd_catalog(args) -> int:
    if args.catalog_command == "list":
        for ident in STANDARD_IDS:
            entry = from_id(ident)
            print(f"{ident:<28} {entry.expected.get('verdict', '')}")
        print()
        print("kinds (required; optional fields):")
        for kind, (req, opt) in list_kinds().items():
            print(f"  {kind:<10} {', '.join(req)}; {', '.join(opt) or '-'}")
        return EXIT_OK
    try:
        entry = from_id(args.id)
    except CatalogError as exc:
        print(f"source error: {exc}", file=sys.stderr)
        return EXIT_SOURCE
    print(f"# {entry.id}")
    print(f"# {entry.provenance}")
    print(f"# ambient c = {entry.spec.c:g}, params = {json.dumps(entry.spec.params, sort_keys=True)}")
    print(entry.source, end="" if entry.source.endswith("\n") else "\n")
    print("expected:")
    for k, val in entry.expected.items():
        print(f"  {k}: {val}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify":
        return _cmd_verify(args)
    return _cmd_catalog(args)


if __name__ == "__main__":
    sys.exit(main())
