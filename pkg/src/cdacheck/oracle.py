"""Independent references used to test the engine and the checker.

Nothing here shares code with ``engine`` beyond the value types and the
legality predicate.  Randomness always comes from ``random.Random(seed)``
(Mersenne Twister), so a seed reproduces a fixture exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .core import (
    MAX_U64,
    CdaError,
    Command,
    Instruction,
    Order,
    OrderDomain,
    Transaction,
    canonical_form,
    more_competitive_ask,
    more_competitive_bid,
    tradable,
)
from .engine import IllegalInputError, StepOutput, legal_input_violation
from .logio import Kind, RawInstruction

ORACLE_MAX_SIDE = 6
ORACLE_MAX_QTY = 10
ORACLE_MAX_STATES = 2_000_000

MUTATION_KINDS = ("drop", "qty", "swap", "move")


class OracleLimitError(CdaError):
    pass


class UnmutatableError(CdaError):
    pass


# -- brute-force maximum matching --------------------------------------------


def max_matching_volume(d: OrderDomain) -> int:
    """Largest total quantity of any matching over ``d``, by exhaustive search.

    Enumerates every per-pair quantity for every tradable pair, tracking the
    residual capacity of each order.  No greedy step anywhere.
    """
    bids, asks = list(d.bids), list(d.asks)
    if len(bids) > ORACLE_MAX_SIDE or len(asks) > ORACLE_MAX_SIDE:
        raise OracleLimitError(f"oracle handles at most {ORACLE_MAX_SIDE} orders per side")
    if any(o.qty > ORACLE_MAX_QTY for o in bids + asks):
        raise OracleLimitError(f"oracle handles quantities up to {ORACLE_MAX_QTY}")
    pairs = [(i, j) for i, b in enumerate(bids) for j, a in enumerate(asks) if tradable(b, a)]
    states = 0

    @lru_cache(maxsize=None)
    def best(k: int, bcap: tuple[int, ...], acap: tuple[int, ...]) -> int:
        nonlocal states
        states += 1
        if states > ORACLE_MAX_STATES:
            raise OracleLimitError("search space too large")
        if k == len(pairs):
            return 0
        i, j = pairs[k]
        result = 0
        for x in range(min(bcap[i], acap[j]) + 1):
            nb = bcap[:i] + (bcap[i] - x,) + bcap[i + 1 :]
            na = acap[:j] + (acap[j] - x,) + acap[j + 1 :]
            result = max(result, x + best(k + 1, nb, na))
        return result

    return best(0, tuple(b.qty for b in bids), tuple(a.qty for a in asks))


# -- alternative process -----------------------------------------------------


def alt_process(bids: Sequence[Order], asks: Sequence[Order], instr: Instruction) -> StepOutput:
    """A second, naive process: rescan the opposite side for every trade."""
    bids, asks = list(bids), list(asks)
    reason = legal_input_violation(bids, asks, instr)
    if reason is not None:
        raise IllegalInputError(reason)
    if instr.command is Command.DEL:
        gone = instr.order.id
        return StepOutput(
            tuple(b for b in bids if b.id != gone), tuple(a for a in asks if a.id != gone), ()
        )

    incoming = instr.order
    is_buy = instr.command is Command.BUY
    opposite = asks if is_buy else bids
    better = more_competitive_ask if is_buy else more_competitive_bid
    remaining = incoming.qty
    matching: list[Transaction] = []
    while remaining > 0:
        pick = None
        for idx, o in enumerate(opposite):
            ok = tradable(incoming, o) if is_buy else tradable(o, incoming)
            if ok and (pick is None or better(o, opposite[pick])):
                pick = idx
        if pick is None:
            break
        o = opposite[pick]
        q = min(remaining, o.qty)
        matching.append(Transaction(incoming.id, o.id, q) if is_buy else Transaction(o.id, incoming.id, q))
        remaining -= q
        if q == o.qty:
            opposite.pop(pick)
        else:
            opposite[pick] = Order(o.id, o.timestamp, o.qty - q, o.price)
    if remaining > 0:
        rest = Order(incoming.id, incoming.timestamp, remaining, incoming.price)
        (bids if is_buy else asks).append(rest)
    return StepOutput(tuple(bids), tuple(asks), tuple(matching))


def alt_run_book(book: Sequence[Instruction]) -> list[StepOutput]:
    bids: tuple[Order, ...] = ()
    asks: tuple[Order, ...] = ()
    out = []
    for instr in book:
        step = alt_process(bids, asks, instr)
        bids, asks = step.resident_bids, step.resident_asks
        out.append(step)
    return out


# -- generators --------------------------------------------------------------


@dataclass(frozen=True)
class GenParams:
    seed: int
    num_instructions: int
    max_price: int = 20
    max_qty: int = 10
    del_probability: float = 0.2
    buy_probability: float = 0.4
    reuse_probability: float = 0.05

    def __post_init__(self) -> None:
        if self.num_instructions < 0:
            raise ValueError("num_instructions must be non-negative")
        if self.max_price < 1 or self.max_qty < 1:
            raise ValueError("max_price and max_qty must be at least 1")
        for name in ("del_probability", "buy_probability", "reuse_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.del_probability + self.buy_probability > 1.0:
            raise ValueError("del_probability + buy_probability must not exceed 1")


def generate_book(p: GenParams) -> list[Instruction]:
    """A random structured order book of primitive instructions.

    Timestamps are ``index + 1``.  Dels pick any previously issued id, even
    one already gone.  Right after a Del the same id is occasionally reused.
    """
    rng = random.Random(p.seed)
    book: list[Instruction] = []
    issued: list[int] = []
    next_id = 1
    for i in range(p.num_instructions):
        ts = i + 1
        prev = book[-1] if book else None
        if prev is not None and prev.command is Command.DEL and rng.random() < p.reuse_probability:
            id = prev.order.id
        else:
            r = rng.random()
            if r < p.del_probability and issued:
                book.append(Instruction.delete(rng.choice(issued), ts))
                continue
            id = next_id
            next_id += rng.randint(1, 3)
            issued.append(id)
        qty = rng.randint(1, p.max_qty)
        price = rng.randint(1, p.max_price)
        is_buy = rng.random() < p.buy_probability / max(1e-12, 1.0 - p.del_probability)
        book.append(Instruction.buy(id, ts, qty, price) if is_buy else Instruction.sell(id, ts, qty, price))
    return book


def generate_raw_stream(p: GenParams, complex_probability: float = 0.4) -> list[RawInstruction]:
    """A random exchange-style stream using every supported instruction kind.

    Raw timestamps step by 10.  UPDATE and DELETE only target resting limit
    orders on the matching side, so the preprocessed book stays legal.
    """
    rng = random.Random(p.seed)
    out: list[RawInstruction] = []
    resting: dict[int, bool] = {}  # id -> is_buy, limit orders only
    last_qty: dict[int, tuple[int, int]] = {}
    next_id = 1
    for i in range(p.num_instructions):
        ts = 10 * (i + 1)
        is_buy = rng.random() < 0.5
        qty = rng.randint(1, p.max_qty)
        price = rng.randint(1, p.max_price)
        r = rng.random()
        if r < p.del_probability and resting:
            id = rng.choice(sorted(resting))
            out.append(RawInstruction(Kind.DELETE, id, ts))
            continue
        if r < p.del_probability + complex_probability:
            kind = rng.choice(("UPDATE", "MARKET", "IOC", "STOP"))
            if kind == "UPDATE" and resting:
                id = rng.choice(sorted(resting))
                side = resting[id]
                old_qty, old_price = last_qty[id]
                if rng.random() < 0.5 and old_qty > 1:
                    qty, price = rng.randint(1, old_qty - 1), old_price
                untraded = rng.randint(0, old_qty) if rng.random() < 0.3 else None
                k = Kind.UPDATE_BUY if side else Kind.UPDATE_SELL
                out.append(RawInstruction(k, id, ts, qty, price, untraded_qty=untraded))
                last_qty[id] = (qty, price)
                continue
            id, next_id = next_id, next_id + 1
            if kind == "MARKET":
                k = Kind.MARKET_BUY if is_buy else Kind.MARKET_SELL
                out.append(RawInstruction(k, id, ts, qty))
                continue
            if kind == "IOC":
                k = Kind.IOC_BUY if is_buy else Kind.IOC_SELL
                out.append(RawInstruction(k, id, ts, qty, price))
                continue
            if kind == "STOP":
                k = Kind.STOP_BUY if is_buy else Kind.STOP_SELL
                trigger = ts + 10 * rng.randint(0, 5)
                out.append(RawInstruction(k, id, ts, qty, price, trigger_timestamp=trigger))
                continue
        id, next_id = next_id, next_id + 1
        out.append(RawInstruction(Kind.BUY if is_buy else Kind.SELL, id, ts, qty, price))
        resting[id] = is_buy
        last_qty[id] = (qty, price)
    return out


def random_legal_input(
    rng: random.Random, max_residents: int = 50, max_qty: int = 100, max_price: int = 50
) -> tuple[tuple[Order, ...], tuple[Order, ...], Instruction]:
    """Non-matchable residents plus an instruction forming a legal input."""
    nb = rng.randint(0, max_residents)
    na = rng.randint(0, max_residents)
    split = rng.randint(0, max_price - 1)
    n = nb + na + 1
    ids = rng.sample(range(1, 4 * n + 10), n)
    stamps = rng.sample(range(1, 4 * n + 10), n)
    bids = tuple(
        Order(ids[k], stamps[k], rng.randint(1, max_qty), rng.randint(0, split)) for k in range(nb)
    )
    asks = tuple(
        Order(ids[nb + k], stamps[nb + k], rng.randint(1, max_qty), rng.randint(split + 1, max_price))
        for k in range(na)
    )
    r = rng.random()
    if r < 0.2:
        residents = bids + asks
        target = rng.choice(residents).id if residents and rng.random() < 0.8 else ids[-1]
        instr = Instruction.delete(target, stamps[-1])
    else:
        o = Order(ids[-1], stamps[-1], rng.randint(1, max_qty), rng.randint(0, max_price))
        instr = Instruction(Command.BUY if r < 0.6 else Command.SELL, o)
    return bids, asks, instr


def corrupt_book(book: Sequence[Instruction], kind: str, rng: random.Random) -> tuple[list[Instruction], int]:
    """Break structure on purpose; returns the corrupted book and the first bad index."""
    book = list(book)
    if kind == "timestamp_swap":
        if len(book) < 2:
            raise UnmutatableError("need two instructions to swap timestamps")
        i = rng.randrange(len(book) - 1)
        a, b = book[i], book[i + 1]
        book[i] = Instruction(a.command, _with_ts(a.order, b.order.timestamp))
        book[i + 1] = Instruction(b.command, _with_ts(b.order, a.order.timestamp))
        return book, i + 1
    if kind == "duplicate_id":
        cands = [
            j for j in range(1, len(book))
            if book[j].command is not Command.DEL and book[j - 1].command is not Command.DEL
        ]
        if not cands:
            raise UnmutatableError("no position for a duplicate id")
        j = rng.choice(cands)
        victim = book[rng.randrange(j)].order.id
        o = book[j].order
        book[j] = Instruction(book[j].command, Order(victim, o.timestamp, o.qty, o.price))
        return book, j
    raise ValueError(f"unknown corruption {kind!r}")


def _with_ts(o: Order, ts: int) -> Order:
    return Order(o.id, ts, o.qty, o.price)


# -- trade-log mutations -----------------------------------------------------


def mutate_trade_log(
    steps: Sequence[Sequence[Transaction]], kind: str, seed: int
) -> tuple[list[list[Transaction]], int]:
    """Apply one mutation to a per-step trade log.

    Returns the mutated log and the earliest step whose canonical matching
    changed.  Every mutation changes at least one canonical form.
    """
    rng = random.Random(seed)
    log = [list(s) for s in steps]
    filled = [k for k, s in enumerate(log) if s]
    if kind == "drop":
        if not filled:
            raise UnmutatableError("no transactions to drop")
        k = rng.choice(filled)
        log[k].pop(rng.randrange(len(log[k])))
        return log, k
    if kind == "qty":
        if not filled:
            raise UnmutatableError("no transactions to alter")
        k = rng.choice(filled)
        j = rng.randrange(len(log[k]))
        t = log[k][j]
        delta = rng.choice((-1, 1))
        if t.qty + delta < 1 or t.qty + delta > MAX_U64:
            delta = -delta
        log[k][j] = Transaction(t.bid_id, t.ask_id, t.qty + delta)
        return log, k
    if kind == "swap":
        cands = []
        for k in filled:
            s = log[k]
            for i in range(len(s)):
                for j in range(i + 1, len(s)):
                    swapped = list(s)
                    swapped[i] = Transaction(s[j].bid_id, s[i].ask_id, s[i].qty)
                    swapped[j] = Transaction(s[i].bid_id, s[j].ask_id, s[j].qty)
                    if canonical_form(swapped) != canonical_form(s):
                        cands.append((k, swapped))
        if not cands:
            raise UnmutatableError("no same-step pair whose bid-id swap is observable")
        k, swapped = rng.choice(cands)
        log[k] = swapped
        return log, k
    if kind == "move":
        if not filled or len(log) < 2:
            raise UnmutatableError("no transaction to move")
        k = rng.choice(filled)
        t = log[k].pop(rng.randrange(len(log[k])))
        targets = [x for x in (k - 1, k + 1) if 0 <= x < len(log)]
        dest = rng.choice(targets)
        log[dest].append(t)
        return log, min(k, dest)
    raise ValueError(f"unknown mutation kind {kind!r}; expected one of {MUTATION_KINDS}")


def delete_before_insert_fixture() -> tuple[list[RawInstruction], list]:
    """Order book whose DELETE for id 7 is logged before id 7 is placed.

    The accompanying trade book comes from an exchange that really placed
    id 7 first and then deleted it, so id 7 never trades.  Replaying the log
    in its recorded order leaves id 7 resident, and the crossing buy at
    timestamp 40 trades against it.
    """
    from .logio import TradeRecord

    rows = [
        RawInstruction(Kind.BUY, 1, 10, 5, 10),
        RawInstruction(Kind.DELETE, 7, 20),
        RawInstruction(Kind.SELL, 7, 30, 3, 12),
        RawInstruction(Kind.SELL, 5, 35, 2, 9),
        RawInstruction(Kind.BUY, 8, 40, 3, 12),
    ]
    trades = [TradeRecord(35, 1, 5, 2)]
    return rows, trades
