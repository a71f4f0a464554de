"""Executable predicates for the three matching properties and input legality.

Every check returns a report carrying witnesses rather than a bare boolean:
an auditor needs to know which orders or transactions broke which rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .core import (
    Command,
    Instruction,
    Order,
    OrderDomain,
    PreconditionError,
    Transaction,
    UnknownOrderError,
    ask_totals,
    bid_totals,
    is_admissible,
    is_matching,
    more_competitive_ask,
    more_competitive_bid,
    multiset_diff,
    normalize_orders,
    traded_asks,
    traded_bids,
    tradable_pair,
)
from .engine import IllegalInputError, StepOutput, absorb, legal_input_violation

__all__ = [
    "PropertyReport",
    "StructureCheck",
    "Violation",
    "check_conservation",
    "check_positive_spread",
    "check_price_time_priority",
    "check_step",
    "is_admissible",
    "is_legal_input",
    "is_structured",
]

POSITIVE_SPREAD = "positive-bid-ask-spread"
PRICE_TIME = "price-time-priority"
CONSERVATION = "conservation"


@dataclass(frozen=True)
class Violation:
    property: str
    witness: str


@dataclass(frozen=True)
class PropertyReport:
    violations: tuple[Violation, ...] = ()

    @property
    def holds(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.holds

    def __add__(self, other: PropertyReport) -> PropertyReport:
        return PropertyReport(self.violations + other.violations)


@dataclass(frozen=True)
class StructureCheck:
    ok: bool
    index: int | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def is_legal_input(bids: Iterable[Order], asks: Iterable[Order], instr: Instruction) -> bool:
    return legal_input_violation(tuple(bids), tuple(asks), instr) is None


def is_structured(book: Sequence[Instruction]) -> StructureCheck:
    seen: set[int] = set()
    prev: Instruction | None = None
    for i, instr in enumerate(book):
        o = instr.order
        if prev is not None and not prev.order.timestamp < o.timestamp:
            return StructureCheck(
                False, i, f"timestamps not increasing ({prev.order.timestamp} then {o.timestamp})"
            )
        if instr.command is not Command.DEL and o.id in seen:
            reused_after_del = (
                prev is not None and prev.command is Command.DEL and prev.order.id == o.id
            )
            if not reused_after_del:
                return StructureCheck(False, i, f"id {o.id} reused without an immediately preceding Del")
        seen.add(o.id)
        prev = instr
    return StructureCheck(True)


def check_positive_spread(bids: Iterable[Order], asks: Iterable[Order]) -> PropertyReport:
    pair = tradable_pair(OrderDomain(tuple(bids), tuple(asks)))
    if pair is None:
        return PropertyReport()
    b, a = pair
    return PropertyReport(
        (Violation(POSITIVE_SPREAD, f"resident bid {b.id} (price {b.price}) >= resident ask {a.id} (price {a.price})"),)
    )


def _priority_side(orders, totals, more_competitive, side) -> list[Violation]:
    out = []
    for worse_id in sorted(totals):
        worse = orders[worse_id]
        for better in orders.values():
            if more_competitive(better, worse) and totals.get(better.id, 0) != better.qty:
                out.append(
                    Violation(
                        PRICE_TIME,
                        f"{side} {worse.id} traded while more competitive {side} {better.id} "
                        f"traded {totals.get(better.id, 0)} of {better.qty}",
                    )
                )
    return out


def check_price_time_priority(
    bids: Iterable[Order], asks: Iterable[Order], m: Iterable[Transaction]
) -> PropertyReport:
    bids = {b.id: b for b in bids}
    asks = {a.id: a for a in asks}
    m = list(m)
    btot, atot = bid_totals(m), ask_totals(m)
    unknown = sorted(set(btot) - set(bids)) + sorted(set(atot) - set(asks))
    if unknown:
        raise UnknownOrderError(f"matching references ids outside the domain: {unknown}")
    found = _priority_side(asks, atot, more_competitive_ask, "ask")
    found += _priority_side(bids, btot, more_competitive_bid, "bid")
    return PropertyReport(tuple(found))


def check_conservation(
    bids: Iterable[Order],
    asks: Iterable[Order],
    out_bids: Iterable[Order],
    out_asks: Iterable[Order],
    m: Iterable[Transaction],
) -> PropertyReport:
    bids, asks, m = tuple(bids), tuple(asks), tuple(m)
    found: list[Violation] = []
    if not is_matching(m, OrderDomain(bids, asks)):
        found.append(Violation(CONSERVATION, "transactions are not a matching over the absorbed domain"))
    for label, domain, residents, traded in (
        ("bids", bids, out_bids, traded_bids),
        ("asks", asks, out_asks, traded_asks),
    ):
        try:
            expected = normalize_orders(multiset_diff(domain, traded(m, domain)))
        except PreconditionError as e:
            found.append(Violation(CONSERVATION, f"cannot subtract traded {label}: {e}"))
            continue
        got = normalize_orders(residents)
        if got != expected:
            exp_map = {o.id: o for o in expected}
            got_map = {o.id: o for o in got}
            diffs = [
                f"{i}: expected {exp_map.get(i)}, got {got_map.get(i)}"
                for i in sorted(set(exp_map) | set(got_map))
                if exp_map.get(i) != got_map.get(i)
            ]
            found.append(Violation(CONSERVATION, f"resident {label} differ: " + "; ".join(diffs)))
    return PropertyReport(tuple(found))


def check_step(
    bids: Iterable[Order], asks: Iterable[Order], instr: Instruction, out: StepOutput
) -> PropertyReport:
    bids, asks = tuple(bids), tuple(asks)
    reason = legal_input_violation(bids, asks, instr)
    if reason is not None:
        raise IllegalInputError(reason)
    d = absorb(bids, asks, instr)
    report = check_positive_spread(out.resident_bids, out.resident_asks)
    try:
        report += check_price_time_priority(d.bids, d.asks, out.matching)
    except UnknownOrderError as e:
        report += PropertyReport((Violation(PRICE_TIME, str(e)),))
    report += check_conservation(d.bids, d.asks, out.resident_bids, out.resident_asks, out.matching)
    return report
