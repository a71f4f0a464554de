"""Step-by-step comparison of an exchange trade book with the reference engine."""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

from .core import Instruction, Transaction, canonical_form, pair_totals
from .engine import IllegalInputError, ReplayEngine
from .logio import PreparedBook, prepare_primitive


class Verdict(enum.Enum):
    MATCH = "Match"
    MISMATCH = "Mismatch"
    INPUT_ERROR = "InputError"


@dataclass(frozen=True)
class Mismatch:
    step: int
    timestamp: int
    expected: tuple[Transaction, ...]
    actual: tuple[Transaction, ...]

    @property
    def diff(self) -> dict[tuple[int, int], int]:
        """expected minus actual quantity for every pair that differs."""
        exp, act = pair_totals(self.expected), pair_totals(self.actual)
        out = {}
        for pair in sorted(set(exp) | set(act)):
            delta = exp.get(pair, 0) - act.get(pair, 0)
            if delta:
                out[pair] = delta
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "timestamp": self.timestamp,
            "expected": [[t.bid_id, t.ask_id, t.qty] for t in self.expected],
            "actual": [[t.bid_id, t.ask_id, t.qty] for t in self.actual],
            "diff": [[b, a, d] for (b, a), d in self.diff.items()],
        }


@dataclass
class CheckReport:
    verdict: Verdict
    instructions: int = 0
    volume: int = 0
    elapsed: float = 0.0
    mismatches: list[Mismatch] = field(default_factory=list)
    error: str | None = None
    error_step: int | None = None
    warnings: list[str] = field(default_factory=list)
    source: str | None = None

    @property
    def first(self) -> Mismatch | None:
        return self.mismatches[0] if self.mismatches else None

    @property
    def mismatch_step(self) -> int | None:
        return self.first.step if self.first else None

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready view.  Everything except ``timing`` is deterministic."""
        first = self.first
        return {
            "source": self.source,
            "verdict": self.verdict.value,
            "mismatch_step": None if first is None else {"index": first.step, "timestamp": first.timestamp},
            "expected": None if first is None else first.to_dict()["expected"],
            "actual": None if first is None else first.to_dict()["actual"],
            "diff": None if first is None else first.to_dict()["diff"],
            "mismatches": [m.to_dict() for m in self.mismatches],
            "error": None if self.error is None else {"step": self.error_step, "reason": self.error},
            "warnings": list(self.warnings),
            "stats": {"instructions": self.instructions, "volume": self.volume},
            "timing": {"elapsed_seconds": round(self.elapsed, 6)},
        }


def check_logs(
    book: PreparedBook | Sequence[Instruction],
    trades: Sequence[Sequence[Transaction]],
    *,
    all_mismatches: bool = False,
    max_steps: int | None = None,
) -> CheckReport:
    """Replay ``book`` and compare canonical matchings with ``trades`` step by step.

    Stops at the first mismatch unless ``all_mismatches``; later entries then
    compare against the engine's own state, so they may be knock-on effects.
    """
    start = time.perf_counter()
    if not isinstance(book, PreparedBook):
        book = prepare_primitive(book)
    if len(trades) != len(book):
        raise ValueError(f"trade log has {len(trades)} steps for a book of {len(book)}")
    n = len(book) if max_steps is None else min(max_steps, len(book))
    report = CheckReport(Verdict.MATCH, warnings=list(book.warnings))
    eng = ReplayEngine()
    for i in range(n):
        instr = book.instructions[i]
        hint = book.untraded_hint.get(i)
        if hint is not None:
            resident = eng.resident(instr.order.id)
            have = resident.qty if resident else 0
            if have != hint:
                report.warnings.append(
                    f"step {i}: update of id {instr.order.id} claims {hint} untraded, replay holds {have}"
                )
        try:
            produced = eng.step(instr)
        except IllegalInputError as e:
            report.verdict = Verdict.INPUT_ERROR
            report.error, report.error_step = e.reason, i
            report.instructions = i
            break
        report.instructions = i + 1
        for t in produced:
            report.volume += t.qty
        given = trades[i]
        if not produced and not given:
            continue
        expected, actual = canonical_form(produced), canonical_form(given)
        if expected != actual:
            report.verdict = Verdict.MISMATCH
            report.mismatches.append(Mismatch(i, book.source_ts[i], expected, actual))
            if not all_mismatches:
                break
    report.elapsed = time.perf_counter() - start
    return report


def replay(book: PreparedBook | Sequence[Instruction]) -> tuple[list[tuple[Transaction, ...]], ReplayEngine]:
    """Canonical matching of every step, plus the final engine state."""
    if not isinstance(book, PreparedBook):
        book = prepare_primitive(book)
    eng = ReplayEngine()
    steps = []
    for i, instr in enumerate(book.instructions):
        try:
            steps.append(canonical_form(eng.step(instr)))
        except IllegalInputError as e:
            raise IllegalInputError(e.reason, step=i) from None
    return steps, eng
