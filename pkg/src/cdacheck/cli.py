"""Command-line front end: check, replay, gen, selfcheck.

Exit codes: 0 match/success, 1 mismatch, 2 input or format error,
3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .checker import CheckReport, Verdict, check_logs, replay
from .core import CdaError, canonical_form
from .engine import IllegalInputError, run_book
from .logio import (
    LogFormatError,
    PreparedBook,
    format_order_book,
    format_trade_book,
    from_raw_primitives,
    group_trades_by_step,
    instructions_to_raw,
    parse_order_book,
    parse_trade_book,
    prepare_primitive,
    preprocess,
    trades_to_records,
)
from .oracle import MUTATION_KINDS, GenParams, UnmutatableError, alt_process, generate_book, mutate_trade_log
from .properties import check_step, is_structured

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

MAX_WARNINGS_SHOWN = 20

log = logging.getLogger("cdacheck")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_help(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class BookOptions:
    raw: bool = False
    strict: bool = False
    lenient: bool = False


def load_book(path: str, opts: BookOptions) -> PreparedBook:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = parse_order_book(fh, lenient=opts.lenient)
    if opts.raw:
        book = from_raw_primitives(rows)
        res = is_structured(book.instructions)
        if not res:
            line = book.source_line[res.index]
            raise IllegalInputError(f"order book not structured (line {line}): {res.reason}", step=res.index)
        return book
    return preprocess(rows, strict=opts.strict)


def run_check(
    orders: str,
    trades: str,
    opts: BookOptions = BookOptions(),
    all_mismatches: bool = False,
    max_steps: int | None = None,
) -> CheckReport:
    source = f"{orders} vs {trades}"
    try:
        book = load_book(orders, opts)
        with open(trades, encoding="utf-8", newline="") as fh:
            records = parse_trade_book(fh, lenient=opts.lenient)
        steps = group_trades_by_step(records, book)
    except (OSError, LogFormatError) as e:
        return CheckReport(Verdict.INPUT_ERROR, error=str(e), source=source)
    except IllegalInputError as e:
        return CheckReport(Verdict.INPUT_ERROR, error=e.reason, error_step=e.step, source=source)
    report = check_logs(book, steps, all_mismatches=all_mismatches, max_steps=max_steps)
    report.source = source
    return report


def _fmt_txs(txs) -> str:
    return " ".join(f"({t.bid_id},{t.ask_id},{t.qty})" for t in txs) or "(none)"


def render(report: CheckReport) -> str:
    head = f"{report.source}: " if report.source else ""
    stats = f"{report.instructions} instructions, volume {report.volume}, {report.elapsed:.3f}s"
    lines = []
    if report.verdict is Verdict.MATCH:
        lines.append(f"{head}MATCH ({stats})")
    elif report.verdict is Verdict.INPUT_ERROR:
        where = f" at step {report.error_step}" if report.error_step is not None else ""
        lines.append(f"{head}INPUT ERROR{where}: {report.error}")
    else:
        lines.append(f"{head}MISMATCH ({stats})")
        if len(report.mismatches) > 1:
            lines.append("  entries after the first are divergence-cascade output from the engine's state")
        for m in report.mismatches:
            lines.append(f"  step {m.step} (timestamp {m.timestamp})")
            lines.append(f"    expected: {_fmt_txs(m.expected)}")
            lines.append(f"    actual:   {_fmt_txs(m.actual)}")
            for (b, a), d in m.diff.items():
                lines.append(f"    bid {b} ask {a}: expected - actual = {d:+d}")
    for w in report.warnings[:MAX_WARNINGS_SHOWN]:
        lines.append(f"  warning: {w}")
    if len(report.warnings) > MAX_WARNINGS_SHOWN:
        lines.append(f"  ... {len(report.warnings) - MAX_WARNINGS_SHOWN} more warnings (use --json for all)")
    return "\n".join(lines)


def _exit_code(report: CheckReport) -> int:
    return {Verdict.MATCH: EXIT_OK, Verdict.MISMATCH: EXIT_MISMATCH, Verdict.INPUT_ERROR: EXIT_INPUT}[report.verdict]


def _check_job(job):
    return run_check(*job)


def cmd_check(args) -> int:
    if len(args.orders) != len(args.trades):
        print("check: give one --trades per --orders", file=sys.stderr)
        return EXIT_INPUT
    opts = BookOptions(raw=args.raw, strict=args.strict, lenient=args.lenient)
    jobs = [(o, t, opts, args.all_mismatches, args.max_steps) for o, t in zip(args.orders, args.trades)]
    if len(jobs) == 1:
        reports = [_check_job(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            reports = list(pool.map(_check_job, jobs))
    if args.json:
        payload = [r.to_dict() for r in reports]
        print(json.dumps(payload[0] if len(payload) == 1 else payload, sort_keys=True, indent=2))
    else:
        for r in reports:
            print(render(r))
    # internal failures raise; among reports the worst verdict wins
    return max(_exit_code(r) for r in reports)


def cmd_replay(args) -> int:
    opts = BookOptions(raw=args.raw, strict=args.strict, lenient=args.lenient)
    try:
        book = load_book(args.orders, opts)
        steps, eng = replay(book)
    except (OSError, LogFormatError) as e:
        print(f"replay: {e}", file=sys.stderr)
        return EXIT_INPUT
    except IllegalInputError as e:
        print(f"replay: illegal input at step {e.step}: {e.reason}", file=sys.stderr)
        return EXIT_INPUT
    text = format_trade_book(trades_to_records(book, steps))
    if args.emit_trades:
        Path(args.emit_trades).write_text(text, encoding="utf-8")
    elif not args.emit_residents:
        sys.stdout.write(text)
    if args.emit_residents:
        for label, side in (("BID", eng.bids), ("ASK", eng.asks)):
            for o in side.in_priority_order():
                print(f"{label},{o.id},{o.timestamp},{o.qty},{o.price}")
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        params = GenParams(
            seed=args.seed,
            num_instructions=args.n,
            max_price=args.max_price,
            max_qty=args.max_qty,
            del_probability=args.del_prob,
            buy_probability=args.buy_prob,
            reuse_probability=args.reuse_prob,
        )
    except ValueError as e:
        print(f"gen: {e}", file=sys.stderr)
        return EXIT_INPUT
    book = generate_book(params)
    prepared = prepare_primitive(book)
    steps, _ = replay(prepared)
    steps = [list(s) for s in steps]
    if args.mutate:
        try:
            steps, k = mutate_trade_log(steps, args.mutate, args.seed if args.mutation_seed is None else args.mutation_seed)
        except UnmutatableError as e:
            print(f"gen: cannot apply {args.mutate}: {e}", file=sys.stderr)
            return EXIT_INPUT
        print(f"mutated step {k} (timestamp {prepared.source_ts[k]})")
    Path(args.out_orders).write_text(format_order_book(instructions_to_raw(book)), encoding="utf-8")
    Path(args.out_trades).write_text(format_trade_book(trades_to_records(prepared, steps)), encoding="utf-8")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    book = generate_book(GenParams(seed=args.seed, num_instructions=args.n, max_price=args.max_price, max_qty=args.max_qty))
    outputs = run_book(book)
    bids, asks = (), ()
    failures = 0
    for i, (instr, out) in enumerate(zip(book, outputs)):
        alt = alt_process(bids, asks, instr)
        for name, o in (("engine", out), ("alt", alt)):
            rep = check_step(bids, asks, instr, o)
            for v in rep.violations:
                failures += 1
                print(f"step {i}: {name} violates {v.property}: {v.witness}")
        if out.normalized() != alt.normalized():
            failures += 1
            print(f"step {i}: engines disagree")
        bids, asks = out.resident_bids, out.resident_asks
    volume = sum(t.qty for o in outputs for t in canonical_form(o.matching))
    print(f"selfcheck seed={args.seed} n={args.n}: {len(book)} steps, volume {volume}, {failures} failures")
    return EXIT_OK if failures == 0 else EXIT_INTERNAL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cdacheck", description="Continuous double auction trade-log checker.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def book_flags(sp):
        mode = sp.add_mutually_exclusive_group()
        mode.add_argument("--raw", action="store_true", help="order book holds only BUY/SELL/DELETE; check structure literally")
        mode.add_argument("--preprocess", action="store_true", help="rewrite exchange instruction types first (default)")
        sp.add_argument("--strict", action="store_true", help="unknown ids in DELETE/UPDATE are errors, not warnings")
        sp.add_argument("--lenient", action="store_true", help="report every malformed line instead of the first")

    c = sub.add_parser("check", help="compare a trade book with the reference engine")
    c.add_argument("--orders", action="append", required=True, metavar="FILE")
    c.add_argument("--trades", action="append", required=True, metavar="FILE")
    book_flags(c)
    c.add_argument("--json", action="store_true")
    c.add_argument("--max-steps", type=int, metavar="N")
    c.add_argument("--all-mismatches", action="store_true")
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("replay", help="run the engine and write the trade book it produces")
    r.add_argument("--orders", required=True, metavar="FILE")
    r.add_argument("--emit-trades", metavar="FILE")
    r.add_argument("--emit-residents", action="store_true")
    book_flags(r)
    r.set_defaults(func=cmd_replay)

    g = sub.add_parser("gen", help="generate an order book and its trade book")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--max-price", type=int, default=20)
    g.add_argument("--max-qty", type=int, default=10)
    g.add_argument("--del-prob", type=float, default=0.2)
    g.add_argument("--buy-prob", type=float, default=0.4)
    g.add_argument("--reuse-prob", type=float, default=0.05)
    g.add_argument("--out-orders", required=True, metavar="FILE")
    g.add_argument("--out-trades", required=True, metavar="FILE")
    g.add_argument("--mutate", choices=MUTATION_KINDS)
    g.add_argument("--mutation-seed", type=int)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("selfcheck", help="replay a generated book with both engines and all property checks")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--max-price", type=int, default=20)
    s.add_argument("--max-qty", type=int, default=10)
    s.set_defaults(func=cmd_selfcheck)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (AssertionError, CdaError) as e:
        print(f"internal invariant failure: {e!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
