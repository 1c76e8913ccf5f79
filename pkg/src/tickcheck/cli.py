"""Command-line entry point.

Exit status: 0 when the property holds (or the command succeeded), 1 when
it is violated, 2 on usage, parse or modeling errors.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from .bench import (
    FischerParams,
    gen_fischer,
    gen_preemptive,
    rows_to_csv,
    run_experiment1,
    run_experiment2,
)
from .cycles import DETECTORS, PropertyTemplate, check_liveness
from .engine import ResourceError, write_trace
from .frontend import ParseError, SourceFile, parse, parse_expr, pretty, pretty_lowered
from .lowering import LoweringConfig, lower
from .model import DEFAULT_INFINITY, DEFAULT_MAXIMAL, ModelError, validate

EXIT_OK, EXIT_VIOLATED, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _int_range(text: str) -> range:
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    if m is None:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {text!r}")
    lo, hi = int(m.group(1)), int(m.group(2))
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return range(lo, hi + 1)


def parse_property(text: str) -> PropertyTemplate:
    """``G(p)``, ``F(p)`` or ``G(p -> F(q))``."""
    s = text.strip()
    m = re.fullmatch(r"G\s*\((.*)\)", s, re.S)
    if m:
        inner = m.group(1)
        r = re.fullmatch(r"(.*?)->\s*F\s*\((.*)\)\s*", inner, re.S)
        if r:
            return PropertyTemplate("response_p_q", parse_expr(r.group(1)), parse_expr(r.group(2)))
        return PropertyTemplate("always_p", parse_expr(inner))
    m = re.fullmatch(r"F\s*\((.*)\)", s, re.S)
    if m:
        return PropertyTemplate("eventually_p", parse_expr(m.group(1)))
    raise UsageError(f"unsupported property {text!r}; use G(p), F(p) or G(p -> F(q))")


def _load(path: str):
    try:
        src = SourceFile.read(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None
    tm = parse(src)
    diags = validate(tm)
    if diags:
        for d in diags:
            print(f"{path}:{d}" if d.pos else f"{path}: {d}", file=sys.stderr)
        raise ModelError(f"{len(diags)} error(s) in {path}")
    return tm


def _lowering(args) -> LoweringConfig:
    return LoweringConfig(
        method=args.method,
        include_now=True if args.now else None,
        infinity=args.infinity,
        maximal=args.maximal,
    )


def _add_lowering_flags(p) -> None:
    p.add_argument("--method", choices=("ledm", "eedm"), default="eedm")
    p.add_argument("--now", action="store_true", help="keep the global clock variable")
    p.add_argument("--infinity", type=int, default=DEFAULT_INFINITY)
    p.add_argument("--maximal", type=int, default=DEFAULT_MAXIMAL)


def _claim_from_file(path: str):
    try:
        tm = parse(SourceFile.read(path))
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None
    procs = tm.base.processes
    if len(procs) != 1:
        raise UsageError(f"{path}: a claim file must contain exactly one process")
    return procs[0]


def cmd_parse(args) -> int:
    tm = _load(args.file)
    print(pretty(tm), end="")
    return EXIT_OK


def cmd_lower(args) -> int:
    tm = _load(args.file)
    print(pretty_lowered(lower(tm, _lowering(args))), end="")
    return EXIT_OK


def cmd_check(args) -> int:
    tm = _load(args.file)
    model = lower(tm, _lowering(args))
    if args.property and args.claim:
        raise UsageError("give either --property or --claim, not both")
    if args.property:
        claim = parse_property(args.property)
    elif args.claim:
        claim = _claim_from_file(args.claim)
    else:
        raise UsageError("check needs --property or --claim")
    verdict = check_liveness(model, claim, args.algorithm, workers=args.workers,
                             max_states=args.max_states)
    st = verdict.stats
    print(f"{verdict.result}: {st.states} states, {st.transitions} transitions, "
          f"{st.time_ms:.1f} ms")
    if verdict.holds:
        return EXIT_OK
    trace_path = args.trace or str(Path(args.file).with_suffix(".trace"))
    write_trace(verdict, trace_path)
    print(f"trace written to {trace_path}")
    return EXIT_VIOLATED


def cmd_bench(args) -> int:
    if args.model == "fischer":
        tm = gen_fischer(FischerParams(args.n, args.db_u, args.dc_l, args.dc_u))
    else:
        tm = gen_preemptive(args.units)
    text = pretty(tm)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.which == "1":
        rows = run_experiment1(args.n, args.range or range(2, 10), workers=args.workers,
                               max_states=args.max_states)
    else:
        rows = run_experiment2(args.n, args.range or range(5, 13), workers=args.workers,
                               max_states=args.max_states)
    text = rows_to_csv(rows)
    if args.csv:
        Path(args.csv).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tickcheck", description="explicit-time model checker")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("parse", help="parse and validate a .tdve file")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("lower", help="print the untimed model")
    p.add_argument("file")
    _add_lowering_flags(p)
    p.set_defaults(func=cmd_lower)

    p = sub.add_parser("check", help="check a property")
    p.add_argument("file")
    _add_lowering_flags(p)
    p.add_argument("--property", help='G(p), F(p) or "G(p -> F(q))"')
    p.add_argument("--claim", help="file holding a single never-claim process")
    p.add_argument("--algorithm", choices=sorted(DETECTORS), default="owcty")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-states", type=int, default=None)
    p.add_argument("--trace", help="counterexample path (default FILE.trace)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="emit a benchmark model as .tdve")
    bsub = p.add_subparsers(dest="model", required=True, parser_class=_Parser)
    f = bsub.add_parser("fischer")
    f.add_argument("--n", type=int, default=3)
    f.add_argument("--db-u", type=int, default=2)
    f.add_argument("--dc-l", type=int, default=3)
    f.add_argument("--dc-u", type=int, default=4)
    f.add_argument("--out")
    f.set_defaults(func=cmd_bench)
    q = bsub.add_parser("preemptive")
    q.add_argument("--units", type=int, nargs="+", default=[3, 2])
    q.add_argument("--out")
    q.set_defaults(func=cmd_bench)

    p = sub.add_parser("experiment", help="run a state-space experiment, CSV out")
    p.add_argument("which", choices=("1", "2"))
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--range", type=_int_range, help="T (exp 1) or dc_u (exp 2) as LO..HI")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-states", type=int, default=None)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"tickcheck: {exc}", file=sys.stderr)
    except ParseError as exc:
        print(str(exc), file=sys.stderr)
    except ResourceError as exc:
        print(f"tickcheck: {exc} ({exc.stats.states} states explored)", file=sys.stderr)
    except (ModelError, ValueError) as exc:
        print(f"tickcheck: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser", "parse_property"]
