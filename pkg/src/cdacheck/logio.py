"""Order-book and trade-book files, and rewriting exchange instruction types.

Order book rows::

    kind,id,timestamp,qty,price[,extra]

``extra`` is the trigger timestamp for STOP_* and the untraded quantity for
UPDATE_*.  Absent values are empty fields.  Trade book rows::

    step_timestamp,bid_id,ask_id,qty

Either file may start with a header line, recognised by a non-numeric
second field.
"""

from __future__ import annotations

import enum
import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

from .core import (
    MAX_TICK,
    MAX_U64,
    CdaError,
    Command,
    Instruction,
    Order,
    Transaction,
)

log = logging.getLogger(__name__)


class Kind(enum.Enum):
    BUY = "BUY"
    SELL = "SELL"
    DELETE = "DELETE"
    UPDATE_BUY = "UPDATE_BUY"
    UPDATE_SELL = "UPDATE_SELL"
    MARKET_BUY = "MARKET_BUY"
    MARKET_SELL = "MARKET_SELL"
    IOC_BUY = "IOC_BUY"
    IOC_SELL = "IOC_SELL"
    STOP_BUY = "STOP_BUY"
    STOP_SELL = "STOP_SELL"

    @property
    def is_buy(self) -> bool:
        return self.value.endswith("BUY")


# (qty required, price required, extra meaning) per kind; None means "must be empty".
_LAYOUT: dict[Kind, tuple[bool | None, bool | None, str | None]] = {
    Kind.BUY: (True, True, None),
    Kind.SELL: (True, True, None),
    Kind.DELETE: (None, None, None),
    Kind.UPDATE_BUY: (True, True, "untraded_qty"),
    Kind.UPDATE_SELL: (True, True, "untraded_qty"),
    Kind.MARKET_BUY: (True, None, None),
    Kind.MARKET_SELL: (True, None, None),
    Kind.IOC_BUY: (True, True, None),
    Kind.IOC_SELL: (True, True, None),
    Kind.STOP_BUY: (True, True, "trigger_timestamp"),
    Kind.STOP_SELL: (True, True, "trigger_timestamp"),
}


@dataclass(frozen=True)
class RawInstruction:
    kind: Kind
    id: int
    timestamp: int
    qty: int | None = None
    price: int | None = None
    trigger_timestamp: int | None = None
    untraded_qty: int | None = None
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class TradeRecord:
    step_timestamp: int
    bid_id: int
    ask_id: int
    qty: int
    line: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.qty <= 0:
            raise ValueError("trade qty must be positive")

    @property
    def transaction(self) -> Transaction:
        return Transaction(self.bid_id, self.ask_id, self.qty)


@dataclass(frozen=True)
class Diagnostic:
    line: int | None
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}" if self.line is not None else self.message


class LogFormatError(CdaError, ValueError):
    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class PreprocessError(LogFormatError):
    pass


# -- parsing -----------------------------------------------------------------


def _lines(source: str | Iterable[str]) -> Iterable[str]:
    return io.StringIO(source) if isinstance(source, str) else source


def _int(text: str, name: str) -> int:
    if not text.isdigit():
        raise ValueError(f"{name} must be a non-negative integer, got {text!r}")
    v = int(text)
    if v > MAX_U64:
        raise ValueError(f"{name} exceeds 2**64 - 1")
    return v


def _opt(text: str, name: str, rule: bool | None) -> int | None:
    text = text.strip()
    if rule is None:
        if text:
            raise ValueError(f"{name} must be empty for this kind")
        return None
    if not text:
        if rule:
            raise ValueError(f"missing {name}")
        return None
    return _int(text, name)


def _is_header(fields: list[str]) -> bool:
    return len(fields) > 1 and not fields[1].strip().isdigit()


def _parse_order_row(fields: list[str], lineno: int) -> RawInstruction:
    if len(fields) not in (5, 6):
        raise ValueError(f"expected 5 or 6 fields, got {len(fields)}")
    name = fields[0].strip()
    if name.startswith("ICEBERG"):
        raise ValueError("iceberg orders are not supported; their priority is not determined by price and time")
    try:
        kind = Kind(name)
    except ValueError:
        raise ValueError(f"unknown instruction kind {name!r}") from None
    qty_rule, price_rule, extra_name = _LAYOUT[kind]
    id = _int(fields[1].strip(), "id")
    ts = _int(fields[2].strip(), "timestamp")
    qty = _opt(fields[3], "qty", qty_rule)
    if qty == 0:
        raise ValueError("qty must be positive")
    price = _opt(fields[4], "price", price_rule)
    if price == MAX_TICK:
        raise ValueError(f"price {MAX_TICK} is reserved for market buys")
    extra_text = fields[5] if len(fields) == 6 else ""
    trigger = untraded = None
    if extra_name == "trigger_timestamp":
        trigger = _opt(extra_text, extra_name, True)
    elif extra_name == "untraded_qty":
        untraded = _opt(extra_text, extra_name, False)
    elif extra_text.strip():
        raise ValueError(f"{kind.value} takes no extra field")
    return RawInstruction(kind, id, ts, qty, price, trigger, untraded, line=lineno)


def _parse_rows(source, row_parser, lenient: bool):
    out, errors = [], []
    for lineno, raw in enumerate(_lines(source), start=1):
        text = raw.rstrip("\r\n")
        if not text.strip():
            continue
        fields = text.split(",")
        if lineno == 1 and _is_header(fields):
            continue
        try:
            out.append(row_parser(fields, lineno))
        except ValueError as e:
            errors.append(Diagnostic(lineno, str(e)))
            if not lenient:
                break
    if errors:
        raise LogFormatError(errors)
    return out


def parse_order_book(source: str | Iterable[str], *, lenient: bool = False) -> list[RawInstruction]:
    """Parse order-book CSV.  By default the first bad line aborts;
    ``lenient`` collects every bad line before raising."""
    return _parse_rows(source, _parse_order_row, lenient)


def _parse_trade_row(fields: list[str], lineno: int) -> TradeRecord:
    if len(fields) != 4:
        raise ValueError(f"expected 4 fields, got {len(fields)}")
    step, bid, ask, qty = (_int(f.strip(), n) for f, n in zip(fields, ("step_timestamp", "bid_id", "ask_id", "qty")))
    if qty == 0:
        raise ValueError("qty must be positive")
    return TradeRecord(step, bid, ask, qty, line=lineno)


def parse_trade_book(source: str | Iterable[str], *, lenient: bool = False) -> list[TradeRecord]:
    return _parse_rows(source, _parse_trade_row, lenient)


# -- serialization -----------------------------------------------------------


def _field(v: int | None) -> str:
    return "" if v is None else str(v)


def format_order_book(rows: Iterable[RawInstruction]) -> str:
    lines = []
    for r in rows:
        cols = [r.kind.value, str(r.id), str(r.timestamp), _field(r.qty), _field(r.price)]
        extra = r.trigger_timestamp if r.trigger_timestamp is not None else r.untraded_qty
        if extra is not None:
            cols.append(str(extra))
        lines.append(",".join(cols) + "\n")
    return "".join(lines)


def format_trade_book(records: Iterable[TradeRecord]) -> str:
    return "".join(f"{r.step_timestamp},{r.bid_id},{r.ask_id},{r.qty}\n" for r in records)


def write_order_book(rows: Iterable[RawInstruction], stream: TextIO) -> None:
    stream.write(format_order_book(rows))


def write_trade_book(records: Iterable[TradeRecord], stream: TextIO) -> None:
    stream.write(format_trade_book(records))


def instructions_to_raw(book: Iterable[Instruction]) -> list[RawInstruction]:
    out = []
    for instr in book:
        o = instr.order
        if instr.command is Command.DEL:
            out.append(RawInstruction(Kind.DELETE, o.id, o.timestamp))
        else:
            kind = Kind.BUY if instr.command is Command.BUY else Kind.SELL
            out.append(RawInstruction(kind, o.id, o.timestamp, o.qty, o.price))
    return out


def trades_to_records(book: PreparedBook, steps: Sequence[Sequence[Transaction]]) -> list[TradeRecord]:
    return [
        TradeRecord(book.source_ts[i], t.bid_id, t.ask_id, t.qty)
        for i, step in enumerate(steps)
        for t in step
    ]


# -- preprocessing -----------------------------------------------------------


@dataclass
class PreparedBook:
    """Primitive instructions plus their provenance in the raw stream.

    ``source_ts[i]`` is the raw timestamp instruction ``i`` came from and
    ``trade_step`` maps a raw timestamp to the index whose trades it owns.
    ``untraded_hint`` maps an index to the untraded quantity an UPDATE
    claimed for the order it replaces.
    """

    instructions: list[Instruction]
    source_ts: list[int]
    source_line: list[int | None]
    trade_step: dict[int, int]
    untraded_hint: dict[int, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.instructions)


def prepare_primitive(book: Sequence[Instruction]) -> PreparedBook:
    """Wrap an already-primitive book, attributing trades by order timestamp."""
    ts = [i.order.timestamp for i in book]
    trade_step: dict[int, int] = {}
    for idx, t in enumerate(ts):
        trade_step.setdefault(t, idx)
    return PreparedBook(list(book), ts, [None] * len(book), trade_step)


def from_raw_primitives(raw: Sequence[RawInstruction]) -> PreparedBook:
    """Literal conversion of BUY/SELL/DELETE rows, keeping raw timestamps."""
    book, bad = [], []
    for r in raw:
        if r.kind is Kind.BUY:
            book.append(Instruction.buy(r.id, r.timestamp, r.qty, r.price))
        elif r.kind is Kind.SELL:
            book.append(Instruction.sell(r.id, r.timestamp, r.qty, r.price))
        elif r.kind is Kind.DELETE:
            book.append(Instruction.delete(r.id, r.timestamp))
        else:
            bad.append(Diagnostic(r.line, f"{r.kind.value} needs preprocessing; not allowed in raw mode"))
    if bad:
        raise PreprocessError(bad)
    prepared = prepare_primitive(book)
    prepared.source_line = [r.line for r in raw]
    return prepared


def preprocess(raw: Sequence[RawInstruction], *, strict: bool = False) -> PreparedBook:
    """Rewrite exchange instruction types into Buy/Sell/Del.

    Output timestamps are book positions 1..n, except that an UPDATE which
    keeps the price and lowers the quantity keeps the priority timestamp of
    the order it replaces.
    """
    errors: list[Diagnostic] = []
    for prev, cur in zip(raw, raw[1:]):
        if cur.timestamp <= prev.timestamp:
            errors.append(Diagnostic(cur.line, f"timestamp {cur.timestamp} not after {prev.timestamp}"))
    for r in raw:
        if r.kind in (Kind.STOP_BUY, Kind.STOP_SELL) and r.trigger_timestamp < r.timestamp:
            errors.append(Diagnostic(r.line, f"stop trigger {r.trigger_timestamp} precedes placement {r.timestamp}"))
    if errors:
        raise PreprocessError(errors)

    def sort_key(item):
        seq, r = item
        if r.kind in (Kind.STOP_BUY, Kind.STOP_SELL):
            return (r.trigger_timestamp, 1, seq)
        return (r.timestamp, 0, seq)

    ordered = [r for _, r in sorted(enumerate(raw), key=sort_key)]

    out = PreparedBook([], [], [], {})
    # id -> (is_buy, last stated qty, last stated price, priority timestamp)
    live: dict[int, tuple[bool, int, int, int]] = {}
    placed: set[int] = set()
    undeleted: set[int] = set()
    problems: list[Diagnostic] = []

    def emit(cmd: Command, r: RawInstruction, qty=1, price=0, ts=None) -> int:
        pos = len(out.instructions) + 1
        order = Order(r.id, pos if ts is None else ts, qty, price)
        out.instructions.append(Instruction(cmd, order))
        out.source_ts.append(r.timestamp)
        out.source_line.append(r.line)
        return pos - 1

    def warn_or_fail(r: RawInstruction, msg: str) -> None:
        d = Diagnostic(r.line, msg)
        if strict:
            problems.append(d)
        else:
            out.warnings.append(str(d))
            log.warning("%s", d)

    for r in ordered:
        k = r.kind
        side = Command.BUY if k.is_buy else Command.SELL
        if k is Kind.DELETE:
            if r.id not in placed:
                warn_or_fail(r, f"DELETE of id {r.id} that was never placed")
            undeleted.discard(r.id)
            out.trade_step[r.timestamp] = emit(Command.DEL, r)
        elif k in (Kind.UPDATE_BUY, Kind.UPDATE_SELL):
            prior = live.get(r.id)
            if prior is None:
                warn_or_fail(r, f"{k.value} of id {r.id} that was never placed as a resting order")
            elif prior[0] != k.is_buy:
                problems.append(Diagnostic(r.line, f"{k.value} targets id {r.id} placed on the other side"))
                continue
            del_idx = emit(Command.DEL, r)
            keep = prior is not None and r.price == prior[2] and r.qty < prior[1]
            new_idx = emit(side, r, r.qty, r.price, ts=prior[3] if keep else None)
            if r.untraded_qty is not None:
                out.untraded_hint[del_idx] = r.untraded_qty
            live[r.id] = (k.is_buy, r.qty, r.price, out.instructions[new_idx].order.timestamp)
            placed.add(r.id)
            undeleted.add(r.id)
            out.trade_step[r.timestamp] = new_idx
        elif k in (Kind.IOC_BUY, Kind.IOC_SELL):
            if r.id in undeleted:
                warn_or_fail(r, f"id {r.id} placed again without an intervening DELETE")
            idx = emit(side, r, r.qty, r.price)
            emit(Command.DEL, r)
            placed.add(r.id)
            out.trade_step[r.timestamp] = idx
        else:
            if r.id in undeleted:
                warn_or_fail(r, f"id {r.id} placed again without an intervening DELETE")
            if k is Kind.MARKET_SELL:
                price = 0
            elif k is Kind.MARKET_BUY:
                price = MAX_TICK
            else:
                price = r.price
            idx = emit(side, r, r.qty, price)
            placed.add(r.id)
            undeleted.add(r.id)
            live[r.id] = (k.is_buy, r.qty, price, idx + 1)
            out.trade_step[r.timestamp] = idx
    if problems:
        raise PreprocessError(problems)
    assert len(out.instructions) <= 2 * len(raw), "preprocessing more than doubled the book"
    return out


def group_trades_by_step(
    records: Sequence[TradeRecord], book: PreparedBook | Sequence[Instruction]
) -> list[list[Transaction]]:
    """Bucket trade records by the book step that produced them."""
    if not isinstance(book, PreparedBook):
        book = prepare_primitive(book)
    steps: list[list[Transaction]] = [[] for _ in range(len(book))]
    orphans = []
    for r in records:
        idx = book.trade_step.get(r.step_timestamp)
        if idx is None:
            orphans.append(Diagnostic(r.line, f"trade at step timestamp {r.step_timestamp} matches no instruction"))
            continue
        steps[idx].append(r.transaction)
    if orphans:
        raise LogFormatError(orphans)
    return steps
