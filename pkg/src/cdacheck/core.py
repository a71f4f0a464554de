"""Orders, transactions and the algebra over them.

Everything here is a pure function over immutable values.  Integers are
unsigned 64-bit in the wire formats; Python ints never wrap, so range is
enforced at construction and every sum is checked explicitly.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

MAX_U64 = 2**64 - 1
# Market buys are modelled with the largest representable limit price.
MAX_TICK = MAX_U64


class CdaError(Exception):
    """Base class for every error raised by this package."""


class PreconditionError(CdaError, ValueError):
    pass


class UnknownOrderError(PreconditionError):
    pass


class ArithmeticOverflow(CdaError, OverflowError):
    pass


def _check_u64(name: str, value: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        raise TypeError(f"{name} must be an int, got {type(value).__name__}")
    if value < 0 or value > MAX_U64:
        raise ValueError(f"{name}={value} outside unsigned 64-bit range")


def checked_sum(values: Iterable[int]) -> int:
    total = 0
    for v in values:
        total += v
        if total > MAX_U64:
            raise ArithmeticOverflow("quantity sum exceeds 2**64 - 1")
    return total


@dataclass(frozen=True, slots=True)
class Order:
    id: int
    timestamp: int
    qty: int
    price: int

    def __post_init__(self) -> None:
        _check_u64("id", self.id)
        _check_u64("timestamp", self.timestamp)
        _check_u64("qty", self.qty)
        _check_u64("price", self.price)
        if self.qty == 0:
            raise ValueError(f"order {self.id}: qty must be positive")

    def with_qty(self, qty: int) -> Order:
        return replace(self, qty=qty)


class Command(enum.Enum):
    BUY = "Buy"
    SELL = "Sell"
    DEL = "Del"


@dataclass(frozen=True, slots=True)
class Instruction:
    command: Command
    order: Order

    @classmethod
    def buy(cls, id: int, timestamp: int, qty: int, price: int) -> Instruction:
        return cls(Command.BUY, Order(id, timestamp, qty, price))

    @classmethod
    def sell(cls, id: int, timestamp: int, qty: int, price: int) -> Instruction:
        return cls(Command.SELL, Order(id, timestamp, qty, price))

    @classmethod
    def delete(cls, id: int, timestamp: int = 0) -> Instruction:
        # Only the id of a Del matters; qty/price are placeholders.
        return cls(Command.DEL, Order(id, timestamp, 1, 0))


@dataclass(frozen=True, slots=True, order=True)
class Transaction:
    bid_id: int
    ask_id: int
    qty: int

    def __post_init__(self) -> None:
        _check_u64("bid_id", self.bid_id)
        _check_u64("ask_id", self.ask_id)
        _check_u64("qty", self.qty)
        if self.qty == 0:
            raise ValueError("transaction qty must be positive")


@dataclass(frozen=True, slots=True)
class OrderDomain:
    bids: tuple[Order, ...] = field(default_factory=tuple)
    asks: tuple[Order, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "bids", tuple(self.bids))
        object.__setattr__(self, "asks", tuple(self.asks))


TransactionSet = Sequence[Transaction]
OrderBook = Sequence[Instruction]


# -- competitiveness ---------------------------------------------------------


def more_competitive_bid(b1: Order, b2: Order) -> bool:
    return b1.price > b2.price or (b1.price == b2.price and b1.timestamp < b2.timestamp)


def more_competitive_ask(a1: Order, a2: Order) -> bool:
    return a1.price < a2.price or (a1.price == a2.price and a1.timestamp < a2.timestamp)


def bid_priority(b: Order) -> tuple[int, int]:
    """Sort key putting the most competitive bid first."""
    return (-b.price, b.timestamp)


def ask_priority(a: Order) -> tuple[int, int]:
    """Sort key putting the most competitive ask first."""
    return (a.price, a.timestamp)


def tradable(b: Order, a: Order) -> bool:
    return b.price >= a.price


def matchable(d: OrderDomain) -> bool:
    if not d.bids or not d.asks:
        return False
    return max(b.price for b in d.bids) >= min(a.price for a in d.asks)


def tradable_pair(d: OrderDomain) -> tuple[Order, Order] | None:
    """Return some tradable (bid, ask) pair of ``d``, or None."""
    if not d.bids or not d.asks:
        return None
    best_bid = max(d.bids, key=lambda b: (b.price, -b.timestamp))
    best_ask = min(d.asks, key=ask_priority)
    return (best_bid, best_ask) if tradable(best_bid, best_ask) else None


def is_admissible(d: OrderDomain) -> bool:
    orders = d.bids + d.asks
    return (
        len({o.id for o in orders}) == len(orders)
        and len({o.timestamp for o in orders}) == len(orders)
    )


# -- transaction sets --------------------------------------------------------


def qty_bid(transactions: Iterable[Transaction], id: int) -> int:
    return checked_sum(t.qty for t in transactions if t.bid_id == id)


def qty_ask(transactions: Iterable[Transaction], id: int) -> int:
    return checked_sum(t.qty for t in transactions if t.ask_id == id)


def vol(transactions: Iterable[Transaction]) -> int:
    return checked_sum(t.qty for t in transactions)


def _totals(transactions: Iterable[Transaction], attr: str) -> dict[int, int]:
    out: dict[int, int] = defaultdict(int)
    for t in transactions:
        out[getattr(t, attr)] += t.qty
        if out[getattr(t, attr)] > MAX_U64:
            raise ArithmeticOverflow("per-order quantity exceeds 2**64 - 1")
    return dict(out)


def bid_totals(transactions: Iterable[Transaction]) -> dict[int, int]:
    return _totals(transactions, "bid_id")


def ask_totals(transactions: Iterable[Transaction]) -> dict[int, int]:
    return _totals(transactions, "ask_id")


def pair_totals(transactions: Iterable[Transaction]) -> dict[tuple[int, int], int]:
    out: dict[tuple[int, int], int] = defaultdict(int)
    for t in transactions:
        key = (t.bid_id, t.ask_id)
        out[key] += t.qty
        if out[key] > MAX_U64:
            raise ArithmeticOverflow("pair quantity exceeds 2**64 - 1")
    return dict(out)


def transaction_valid(t: Transaction, d: OrderDomain) -> bool:
    b = next((o for o in d.bids if o.id == t.bid_id), None)
    a = next((o for o in d.asks if o.id == t.ask_id), None)
    if b is None or a is None:
        return False
    return tradable(b, a) and t.qty <= min(b.qty, a.qty)


def is_matching(m: Iterable[Transaction], d: OrderDomain) -> bool:
    m = list(m)
    bids = {b.id: b for b in d.bids}
    asks = {a.id: a for a in d.asks}
    for t in m:
        b, a = bids.get(t.bid_id), asks.get(t.ask_id)
        if b is None or a is None or not tradable(b, a) or t.qty > min(b.qty, a.qty):
            return False
    for id, total in bid_totals(m).items():
        if total > bids[id].qty:
            return False
    for id, total in ask_totals(m).items():
        if total > asks[id].qty:
            return False
    return True


def canonical_form(m: Iterable[Transaction]) -> tuple[Transaction, ...]:
    """One transaction per (bid, ask) pair carrying the pair's total, sorted."""
    return tuple(Transaction(b, a, q) for (b, a), q in sorted(pair_totals(m).items()))


def concrete_terms(t: Transaction, d: OrderDomain) -> tuple[int, int]:
    """Illustrative (price, timestamp) of a trade: the ask's price, later timestamp.

    Never used in any comparison; matchings are compared on quantities only.
    """
    b = next(o for o in d.bids if o.id == t.bid_id)
    a = next(o for o in d.asks if o.id == t.ask_id)
    return a.price, max(b.timestamp, a.timestamp)


# -- order collections -------------------------------------------------------


def _traded(m: Iterable[Transaction], orders: Iterable[Order], attr: str) -> tuple[Order, ...]:
    by_id = {o.id: o for o in orders}
    totals = _totals(m, attr)
    missing = sorted(set(totals) - set(by_id))
    if missing:
        raise UnknownOrderError(f"transactions reference unknown order ids {missing}")
    return tuple(by_id[i].with_qty(q) for i, q in sorted(totals.items()))


def traded_bids(m: Iterable[Transaction], bids: Iterable[Order]) -> tuple[Order, ...]:
    return _traded(m, bids, "bid_id")


def traded_asks(m: Iterable[Transaction], asks: Iterable[Order]) -> tuple[Order, ...]:
    return _traded(m, asks, "ask_id")


def multiset_diff(s1: Iterable[Order], s2: Iterable[Order]) -> tuple[Order, ...]:
    """Subtract quantities of ``s2`` from the matching orders of ``s1``.

    Quantity acts as multiplicity.  Orders reduced to zero disappear.
    """
    s1 = tuple(s1)
    by_id = {o.id: o for o in s1}
    take: dict[int, int] = {}
    for o in s2:
        base = by_id.get(o.id)
        if base is None:
            raise UnknownOrderError(f"order {o.id} not present in minuend")
        if (base.timestamp, base.price) != (o.timestamp, o.price):
            raise PreconditionError(f"order {o.id}: timestamp/price differ between operands")
        if o.qty > base.qty:
            raise PreconditionError(f"order {o.id}: subtracting {o.qty} from {base.qty}")
        take[o.id] = o.qty
    out = []
    for o in s1:
        left = o.qty - take.get(o.id, 0)
        if left > 0:
            out.append(o if left == o.qty else o.with_qty(left))
    return tuple(out)


def normalize_orders(orders: Iterable[Order]) -> tuple[Order, ...]:
    return tuple(sorted(orders, key=lambda o: o.id))


def same_orders(s1: Iterable[Order], s2: Iterable[Order]) -> bool:
    return normalize_orders(s1) == normalize_orders(s2)
