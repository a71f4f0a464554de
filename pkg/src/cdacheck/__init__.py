"""Price-time priority matching engine and trade-log checker for continuous double auctions."""

from .core import (
    Command,
    Instruction,
    Order,
    OrderDomain,
    Transaction,
    canonical_form,
)
from .engine import StepOutput, iterated, process_instruction, run_book
from .checker import CheckReport, Verdict, check_logs

__all__ = [
    "CheckReport",
    "Command",
    "Instruction",
    "Order",
    "OrderDomain",
    "StepOutput",
    "Transaction",
    "Verdict",
    "canonical_form",
    "check_logs",
    "iterated",
    "process_instruction",
    "run_book",
]
