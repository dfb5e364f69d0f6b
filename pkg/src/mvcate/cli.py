"""Command-line entry point: ``mvcate <verb> ...``.

Exit codes: 0 success, 1 configuration or I/O error, 2 partial failures
(error rows in a run, or failed checks in ``verify``).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .egs import surrogate_fracture_model
from .harness.config import ConfigError, load_config
from .harness.report import emit_plot, emit_table
from .harness.run import WORKERS_ENV, read_results, run, write_results

log = logging.getLogger("mvcate")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as err:
        log.error("%s", err)
        return EXIT_CONFIG
    result = run(config, workers=args.workers)
    try:
        path = write_results(result, config, args.output_dir)
    except OSError as err:
        log.error("cannot write results: %s", err)
        return EXIT_CONFIG
    log.info("%d rows (config %s) -> %s", len(result), config.config_hash, path)
    for row in result.failures:
        log.warning("failed: %s/%s seed %d: %s", row.base, row.learner, row.seed, row.error)
    return EXIT_PARTIAL if result.failures else EXIT_OK


def _load_results(path):
    try:
        return read_results(Path(path))
    except (OSError, ValueError) as err:
        log.error("cannot read %s: %s", path, err)
        return None


def cmd_table(args) -> int:
    result = _load_results(args.results)
    if result is None:
        return EXIT_CONFIG
    if not result.rows:
        log.error("no rows in %s", args.results)
        return EXIT_CONFIG
    _emit(emit_table(result, group_by=args.group_by, column=args.column), args.out)
    return EXIT_OK


def cmd_plot(args) -> int:
    result = _load_results(args.results)
    if result is None:
        return EXIT_CONFIG
    if not result.rows:
        log.error("no rows in %s", args.results)
        return EXIT_CONFIG
    _emit(emit_plot(result), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .harness.checks import CRITERIA, run_checks

    numbers = None
    if args.only:
        try:
            numbers = sorted({int(v) for v in args.only.split(",")})
        except ValueError:
            log.error("--only expects comma-separated criterion numbers")
            return EXIT_CONFIG
        unknown = [n for n in numbers if n not in CRITERIA]
        if unknown:
            log.error("unknown criteria %s", unknown)
            return EXIT_CONFIG
    results = run_checks(numbers, echo=print)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_gen_egs(args) -> int:
    table = surrogate_fracture_model(args.seed)
    try:
        table.to_csv(args.out)
    except OSError as err:
        log.error("cannot write %s: %s", args.out, err)
        return EXIT_CONFIG
    log.info("wrote %d rows to %s", len(table), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvcate", description="Multi-valued treatment CATE experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="execute an experiment config")
    p.add_argument("config")
    p.add_argument("--output-dir", default=None, help="override [experiment] output_dir")
    p.add_argument("--workers", type=int, default=None, help=f"parallel cells (default: ${WORKERS_ENV} or 1)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("table", help="markdown table of mean mPEHE")
    p.add_argument("results")
    p.add_argument("--group-by", default="learner", choices=("learner", "base", "scenario", "K"))
    p.add_argument("--column", default="base", choices=("learner", "base", "scenario", "K"))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("plot", help="SVG chart of mean mPEHE against K")
    p.add_argument("results")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--only", default=None, help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-egs-surrogate", help="write the surrogate fracture table as CSV")
    p.add_argument("out")
    p.add_argument("--seed", type=int, default=None, help="optional output jitter seed")
    p.set_defaults(func=cmd_gen_egs)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
