"""``blowup-lab <subcommand> --config <path> [--out <dir>] [--jobs N]``."""
from __future__ import annotations

import argparse
import sys

from .harness import EXIT_CONFIG, KINDS, ConfigError, load_config, run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowup-lab",
                                 description="Blow-up exponents, eigenfunctions and lifespan sweeps.")
    ap.add_argument("subcommand", choices=KINDS + ("all",))
    ap.add_argument("--config", required=True, help="strict JSON experiment config")
    ap.add_argument("--out", default=None, help="output directory (BLOWUP_LAB_OUT overrides)")
    ap.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg.kind = args.subcommand
    status = run(cfg, args.out, args.jobs)
    print(f"blowup-lab {args.subcommand}: exit {status}")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
