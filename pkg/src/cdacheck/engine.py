"""Reference price-time priority matching process.

``ReplayEngine`` keeps both resident sides ordered by competitiveness so the
best opposite order is always at the end of a list.  The pure step
functions (``match_ask``, ``process_instruction``...) build an engine from
the given residents, run one step and snapshot the result.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .core import (
    Command,
    CdaError,
    Instruction,
    Order,
    OrderDomain,
    PreconditionError,
    Transaction,
    canonical_form,
    is_admissible,
    matchable,
    normalize_orders,
    tradable,
)


class IllegalInputError(PreconditionError):
    """Residents plus instruction do not form a legal input."""

    def __init__(self, reason: str, step: int | None = None):
        self.reason = reason
        self.step = step
        where = f"step {step}: " if step is not None else ""
        super().__init__(where + reason)


class NotStructuredError(CdaError, ValueError):
    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"order book not structured at index {index}: {reason}")


@dataclass(frozen=True, slots=True)
class StepOutput:
    resident_bids: tuple[Order, ...] = field(default_factory=tuple)
    resident_asks: tuple[Order, ...] = field(default_factory=tuple)
    matching: tuple[Transaction, ...] = field(default_factory=tuple)

    def normalized(self) -> tuple[tuple[Order, ...], tuple[Order, ...], tuple[Transaction, ...]]:
        """Residents sorted by id and the canonical matching; comparable with ==."""
        return (
            normalize_orders(self.resident_bids),
            normalize_orders(self.resident_asks),
            canonical_form(self.matching),
        )


EMPTY_STEP = StepOutput()


class _Side:
    """Resident orders of one side; ``_keys`` ascending so the best is last."""

    __slots__ = ("is_bid", "_keys", "_by_id")

    def __init__(self, is_bid: bool):
        self.is_bid = is_bid
        self._keys: list[tuple[int, int, int]] = []
        self._by_id: dict[int, Order] = {}

    def _key(self, o: Order) -> tuple[int, int, int]:
        if self.is_bid:
            return (o.price, -o.timestamp, o.id)
        return (-o.price, -o.timestamp, o.id)

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, id: int) -> bool:
        return id in self._by_id

    def get(self, id: int) -> Order | None:
        return self._by_id.get(id)

    def best(self) -> Order | None:
        return self._by_id[self._keys[-1][2]] if self._keys else None

    def add(self, o: Order) -> None:
        key = self._key(o)
        i = bisect_left(self._keys, key)
        for j in (i - 1, i):
            if 0 <= j < len(self._keys):
                assert self._keys[j][:2] != key[:2], "equal competitiveness among residents"
        self._keys.insert(i, key)
        self._by_id[o.id] = o

    def remove(self, id: int) -> Order | None:
        o = self._by_id.pop(id, None)
        if o is not None:
            key = self._key(o)
            i = bisect_left(self._keys, key)
            del self._keys[i]
        return o

    def pop_best(self) -> Order:
        key = self._keys.pop()
        return self._by_id.pop(key[2])

    def set_best_qty(self, qty: int) -> None:
        o = self._by_id[self._keys[-1][2]]
        self._by_id[o.id] = o.with_qty(qty)

    def orders(self) -> tuple[Order, ...]:
        return tuple(sorted(self._by_id.values(), key=lambda o: o.id))

    def in_priority_order(self) -> list[Order]:
        return [self._by_id[k[2]] for k in reversed(self._keys)]


class ReplayEngine:
    """Stateful replay of an order book, one instruction at a time.

    Every step is checked for legality in O(log n): the incoming order must
    carry an id and a timestamp not held by any resident.  Residents are
    never matchable by construction.
    """

    def __init__(self) -> None:
        self.bids = _Side(is_bid=True)
        self.asks = _Side(is_bid=False)
        self._timestamps: set[int] = set()

    @classmethod
    def from_residents(cls, bids: Iterable[Order], asks: Iterable[Order]) -> ReplayEngine:
        bids, asks = tuple(bids), tuple(asks)
        d = OrderDomain(bids, asks)
        if not is_admissible(d):
            raise IllegalInputError("residents have duplicate ids or timestamps")
        if matchable(d):
            raise IllegalInputError("residents are matchable")
        eng = cls()
        for b in bids:
            eng.bids.add(b)
        for a in asks:
            eng.asks.add(a)
        eng._timestamps.update(o.timestamp for o in bids + asks)
        return eng

    def resident(self, id: int) -> Order | None:
        return self.bids.get(id) or self.asks.get(id)

    def snapshot(self, matching: Sequence[Transaction] = ()) -> StepOutput:
        return StepOutput(self.bids.orders(), self.asks.orders(), tuple(matching))

    def check_legal(self, instr: Instruction) -> None:
        if instr.command is Command.DEL:
            return
        o = instr.order
        if o.id in self.bids or o.id in self.asks:
            raise IllegalInputError(f"duplicate id {o.id}: already resident")
        if o.timestamp in self._timestamps:
            raise IllegalInputError(f"duplicate timestamp {o.timestamp} among residents")

    def step(self, instr: Instruction) -> list[Transaction]:
        self.check_legal(instr)
        cmd = instr.command
        if cmd is Command.DEL:
            self._delete(instr.order.id)
            return []
        if cmd is Command.BUY:
            return self._match(instr.order, incoming_bid=True)
        return self._match(instr.order, incoming_bid=False)

    def _delete(self, id: int) -> None:
        for side in (self.bids, self.asks):
            o = side.remove(id)
            if o is not None:
                self._timestamps.discard(o.timestamp)

    def _match(self, incoming: Order, incoming_bid: bool) -> list[Transaction]:
        own, other = (self.bids, self.asks) if incoming_bid else (self.asks, self.bids)
        remaining = incoming.qty
        out: list[Transaction] = []
        while remaining:
            best = other.best()
            if best is None:
                break
            if incoming_bid:
                if not tradable(incoming, best):
                    break
            elif not tradable(best, incoming):
                break
            q = min(best.qty, remaining)
            if incoming_bid:
                out.append(Transaction(incoming.id, best.id, q))
            else:
                out.append(Transaction(best.id, incoming.id, q))
            if best.qty <= remaining:
                other.pop_best()
                self._timestamps.discard(best.timestamp)
            else:
                other.set_best_qty(best.qty - remaining)
            remaining -= q
        if remaining:
            own.add(incoming if remaining == incoming.qty else incoming.with_qty(remaining))
            self._timestamps.add(incoming.timestamp)
        return out


# -- pure step functions -----------------------------------------------------


def absorb(bids: Iterable[Order], asks: Iterable[Order], instr: Instruction) -> OrderDomain:
    bids, asks = tuple(bids), tuple(asks)
    cmd = instr.command
    if cmd is Command.DEL:
        id = instr.order.id
        return OrderDomain(
            tuple(b for b in bids if b.id != id), tuple(a for a in asks if a.id != id)
        )
    if cmd is Command.BUY:
        return OrderDomain(bids + (instr.order,), asks)
    return OrderDomain(bids, asks + (instr.order,))


def _one_sided(bids, asks, incoming: Order, incoming_bid: bool) -> StepOutput:
    bids, asks = tuple(bids), tuple(asks)
    combined = OrderDomain(bids + (incoming,), asks) if incoming_bid else OrderDomain(bids, asks + (incoming,))
    if not is_admissible(combined):
        raise IllegalInputError("incoming order duplicates a resident id or timestamp")
    eng = ReplayEngine.from_residents(bids, asks)
    m = eng._match(incoming, incoming_bid=incoming_bid)
    return eng.snapshot(m)


def match_ask(bids: Iterable[Order], asks: Iterable[Order], ask: Order) -> StepOutput:
    """Trade an incoming ask against the best tradable resident bids."""
    return _one_sided(bids, asks, ask, incoming_bid=False)


def match_bid(bids: Iterable[Order], asks: Iterable[Order], bid: Order) -> StepOutput:
    """Trade an incoming bid against the best tradable resident asks."""
    return _one_sided(bids, asks, bid, incoming_bid=True)


def del_order(bids: Iterable[Order], asks: Iterable[Order], id: int) -> StepOutput:
    d = absorb(bids, asks, Instruction.delete(id))
    return StepOutput(normalize_orders(d.bids), normalize_orders(d.asks), ())


def legal_input_violation(bids: Sequence[Order], asks: Sequence[Order], instr: Instruction) -> str | None:
    """Why ``(bids, asks, instr)`` is not a legal input, or None if it is."""
    if matchable(OrderDomain(bids, asks)):
        return "residents are matchable"
    d = absorb(bids, asks, instr)
    orders = d.bids + d.asks
    ids = [o.id for o in orders]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        return f"duplicate id {dup[0]}"
    stamps = [o.timestamp for o in orders]
    if len(set(stamps)) != len(stamps):
        dup = sorted({s for s in stamps if stamps.count(s) > 1})
        return f"duplicate timestamp {dup[0]}"
    return None


def process_instruction(bids: Iterable[Order], asks: Iterable[Order], instr: Instruction) -> StepOutput:
    bids, asks = tuple(bids), tuple(asks)
    reason = legal_input_violation(bids, asks, instr)
    if reason is not None:
        raise IllegalInputError(reason)
    if instr.command is Command.BUY:
        return match_bid(bids, asks, instr.order)
    if instr.command is Command.SELL:
        return match_ask(bids, asks, instr.order)
    return del_order(bids, asks, instr.order.id)


def _require_structured(book: Sequence[Instruction]) -> None:
    from .properties import is_structured

    res = is_structured(book)
    if not res:
        raise NotStructuredError(res.index, res.reason)


def run_book(book: Sequence[Instruction], *, check_structure: bool = True) -> list[StepOutput]:
    """Every step's output of iterating the process over ``book``, in one pass."""
    if check_structure:
        _require_structured(book)
    eng = ReplayEngine()
    out = []
    for i, instr in enumerate(book):
        try:
            m = eng.step(instr)
        except IllegalInputError as e:
            raise IllegalInputError(e.reason, step=i) from None
        out.append(eng.snapshot(m))
    return out


def iterated(book: Sequence[Instruction], k: int) -> StepOutput:
    """Output of the process at time ``k`` (1-based) when run over ``book``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    _require_structured(book)
    if k == 0 or k > len(book):
        return EMPTY_STEP
    eng = ReplayEngine()
    m: list[Transaction] = []
    for i, instr in enumerate(book[:k]):
        try:
            m = eng.step(instr)
        except IllegalInputError as e:
            raise IllegalInputError(e.reason, step=i) from None
    return eng.snapshot(m)
