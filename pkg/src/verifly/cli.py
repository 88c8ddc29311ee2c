"""Command line: ``verifly check``, ``verifly serve`` and ``verifly bench``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .chc import dump_chc
from .harness import BenchConfig, BenchMismatch, CorpusSpec, gen_edit_script, gen_program, run_bench, write_csv
from .workspace import DOMAIN_CHOICES, Analyzer, Config, read_files

log = logging.getLogger("verifly")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
EXIT_OK, EXIT_FALSE, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit with 2, as documented
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def setup_logging(stream=None) -> None:
    level = os.environ.get("VERIFLY_LOG", "warn").strip().lower()
    root = logging.getLogger("verifly")
    root.setLevel(LOG_LEVELS.get(level, logging.WARNING))
    if not root.handlers:
        handler = logging.StreamHandler(stream or sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)
    if level not in LOG_LEVELS:
        root.warning("VERIFLY_LOG=%r is not one of %s; using warn", level, "|".join(LOG_LEVELS))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="verifly", description="Static assertion checking for logic programs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="analyze files once and report assertion verdicts")
    c.add_argument("paths", nargs="+")
    c.add_argument("--domains", choices=DOMAIN_CHOICES, default="auto")
    c.add_argument("--json", action="store_true", help="print diagnostics as JSON")
    c.add_argument("--dump-chc", action="store_true", help="print the normalized clauses first")
    c.add_argument("--trace-fixpoint", action="store_true", help="log node recomputations to stderr")
    c.add_argument("--trace-incremental", action="store_true", help="log invalidation reports to stderr")
    c.add_argument("--snapshot", help="write the analysis graph here")
    c.add_argument("--snapshot-format", choices=("bin", "json"), default="bin")
    c.add_argument("--no-prelude", action="store_true", help="do not load the bundled list library")

    s = sub.add_parser("serve", help="run the diagnostics daemon")
    s.add_argument("--stdio", action="store_true", required=True, help="speak line-delimited JSON on stdin/stdout")
    s.add_argument("--debounce-ms", type=int, default=300)
    s.add_argument("--domains", choices=DOMAIN_CHOICES, default="auto")
    s.add_argument("--snapshot")
    s.add_argument("--snapshot-format", choices=("bin", "json"), default="bin")
    s.add_argument("--no-prelude", action="store_true")

    b = sub.add_parser("bench", help="time incremental against scratch analysis")
    b.add_argument("--spec", required=True, help="CorpusSpec JSON file")
    b.add_argument("--scripts", type=int, required=True, help="number of random edit scripts")
    b.add_argument("--out", required=True, help="CSV output path")
    b.add_argument("--edits", type=int, default=10, help="edits per script")
    b.add_argument("--repetitions", type=int, default=5)
    b.add_argument("--domains", choices=DOMAIN_CHOICES, default="auto")
    return p


def _stderr_line(text: str) -> None:
    print(text, file=sys.stderr)


def run_check(args) -> int:
    config = Config(domains=args.domains, prelude=not args.no_prelude, snapshot=args.snapshot,
                    snapshot_format=args.snapshot_format)
    try:
        files = read_files(args.paths)
    except (OSError, UnicodeDecodeError) as err:
        print(f"verifly: cannot read input: {err}", file=sys.stderr)
        return EXIT_USAGE
    analyzer = Analyzer(
        config,
        trace_fixpoint=_stderr_line if args.trace_fixpoint else None,
        trace_incremental=_stderr_line if args.trace_incremental else None,
    )
    result = analyzer.run(files)
    if args.dump_chc:
        sys.stdout.write(dump_chc(result.program))
    if args.json:
        sys.stdout.write(json.dumps({"diagnostics": result.diagnostics_json()}, separators=(",", ":")) + "\n")
    else:
        for line in result.lines:
            print(line)
    log.info("stats %s", json.dumps(result.stats.to_json()))
    if args.snapshot:
        try:
            analyzer.save_snapshot()
        except OSError as err:
            print(f"verifly: cannot write snapshot: {err}", file=sys.stderr)
            return EXIT_USAGE
    if result.syntax_errors:
        return EXIT_USAGE
    return EXIT_FALSE if result.has_false else EXIT_OK


def run_serve(args) -> int:
    from .server import serve

    if args.debounce_ms < 0:
        print("verifly: --debounce-ms must be nonnegative", file=sys.stderr)
        return EXIT_USAGE
    config = Config(domains=args.domains, prelude=not args.no_prelude, debounce_ms=args.debounce_ms,
                    snapshot=args.snapshot, snapshot_format=args.snapshot_format)
    return serve(config)


def run_bench_cmd(args) -> int:
    try:
        spec = CorpusSpec.load(args.spec)
    except (OSError, ValueError, TypeError) as err:
        print(f"verifly: bad corpus spec: {err}", file=sys.stderr)
        return EXIT_USAGE
    if args.scripts < 0 or args.edits < 0 or args.repetitions < 1:
        print("verifly: --scripts and --edits must be nonnegative, --repetitions positive", file=sys.stderr)
        return EXIT_USAGE
    corpus = gen_program(spec)
    scripts = [gen_edit_script(spec.seed * 1000 + i, corpus, args.edits) for i in range(args.scripts)]
    domain = None if args.domains == "auto" else args.domains
    try:
        rows = run_bench(corpus, scripts, BenchConfig(args.repetitions, domain))
    except BenchMismatch as err:
        write_csv(err.args[1] if len(err.args) > 1 else [], args.out)
        print(f"verifly: {err.args[0]}", file=sys.stderr)
        return EXIT_FALSE
    write_csv(rows, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "check":
        return run_check(args)
    if args.command == "serve":
        return run_serve(args)
    return run_bench_cmd(args)


if __name__ == "__main__":
    sys.exit(main())
