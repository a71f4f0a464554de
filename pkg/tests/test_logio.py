import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdacheck.checker import check_logs, replay
from cdacheck.core import MAX_TICK, Command, Instruction, Order, Transaction as T, more_competitive_bid
from cdacheck.logio import (
    Kind,
    LogFormatError,
    PreprocessError,
    RawInstruction,
    TradeRecord,
    format_order_book,
    format_trade_book,
    from_raw_primitives,
    group_trades_by_step,
    instructions_to_raw,
    parse_order_book,
    parse_trade_book,
    preprocess,
    trades_to_records,
)
from cdacheck.oracle import GenParams, generate_book, generate_raw_stream
from cdacheck.engine import ReplayEngine


class TestParseOrderBook:
    def test_buy(self):
        assert parse_order_book("BUY,1,100,5,10\n") == [RawInstruction(Kind.BUY, 1, 100, 5, 10)]

    def test_delete(self):
        assert parse_order_book("DELETE,1,101,,\n") == [RawInstruction(Kind.DELETE, 1, 101)]

    def test_zero_qty(self):
        with pytest.raises(LogFormatError, match="qty must be positive") as e:
            parse_order_book("BUY,1,100,0,10\n")
        assert e.value.diagnostics[0].line == 1

    def test_header_skipped(self):
        text = "kind,id,timestamp,qty,price\nSELL,2,5,1,9\n"
        assert parse_order_book(text) == [RawInstruction(Kind.SELL, 2, 5, 1, 9)]

    def test_extras(self):
        rows = parse_order_book("STOP_SELL,3,10,2,7,40\nUPDATE_BUY,4,11,2,7,1\nUPDATE_BUY,4,12,2,7\n")
        assert rows[0].trigger_timestamp == 40
        assert rows[1].untraded_qty == 1
        assert rows[2].untraded_qty is None

    def test_market(self):
        assert parse_order_book("MARKET_SELL,2,2,3,\n")[0].price is None

    @pytest.mark.parametrize(
        "line, message",
        [
            ("FOO,1,1,1,1", "unknown instruction kind"),
            ("ICEBERG_BUY,1,1,1,1", "iceberg"),
            ("BUY,1,1,,1", "missing qty"),
            ("BUY,1,x1,1,1", "non-negative integer"),
            ("BUY,1,1,1,-3", "non-negative integer"),
            ("DELETE,1,1,3,", "must be empty"),
            ("MARKET_BUY,1,1,3,5", "must be empty"),
            ("STOP_BUY,1,1,3,5", "missing trigger_timestamp"),
            (f"BUY,1,1,1,{MAX_TICK}", "reserved"),
            ("BUY,1,1,1", "expected 5 or 6 fields"),
            ("BUY,1,1,1,1,9", "no extra field"),
        ],
    )
    def test_errors(self, line, message):
        with pytest.raises(LogFormatError, match=message):
            parse_order_book("BUY,7,0,1,1\n" + line + "\n")

    def test_first_error_aborts_lenient_collects(self):
        text = "BUY,1,1,0,1\nBUY,2,2,1,1\nSELL,3,3,1,\n"
        with pytest.raises(LogFormatError) as e:
            parse_order_book(text)
        assert [d.line for d in e.value.diagnostics] == [1]
        with pytest.raises(LogFormatError) as e:
            parse_order_book(text, lenient=True)
        assert [d.line for d in e.value.diagnostics] == [1, 3]


class TestParseTradeBook:
    def test_row(self):
        assert parse_trade_book("100,1,2,3\n") == [TradeRecord(100, 1, 2, 3)]

    def test_empty(self):
        assert parse_trade_book("") == []

    def test_zero_qty(self):
        with pytest.raises(LogFormatError):
            parse_trade_book("100,1,2,0\n")

    def test_header(self):
        assert parse_trade_book("step_timestamp,bid_id,ask_id,qty\n1,2,3,4\n") == [TradeRecord(1, 2, 3, 4)]


class TestRoundTrip:
    def test_generated_streams(self):
        for seed in range(20):
            raw = generate_raw_stream(GenParams(seed=seed, num_instructions=150))
            text = format_order_book(raw)
            assert format_order_book(parse_order_book(text)) == text
            assert parse_order_book(text) == raw

    @given(st.lists(st.builds(TradeRecord, st.integers(0, 2**64 - 1), st.integers(0, 99), st.integers(0, 99), st.integers(1, 2**64 - 1)), max_size=20))
    def test_trade_records(self, records):
        text = format_trade_book(records)
        assert parse_trade_book(text) == records
        assert format_trade_book(parse_trade_book(text)) == text

    def test_trailing_newline_optional(self):
        assert parse_order_book("BUY,1,100,5,10") == parse_order_book("BUY,1,100,5,10\n")


class TestPreprocess:
    def test_decrease_update_keeps_priority(self):
        raw = [RawInstruction(Kind.BUY, 1, 1, 5, 10), RawInstruction(Kind.UPDATE_BUY, 1, 2, 3, 10)]
        book = preprocess(raw).instructions
        assert [i.command for i in book] == [Command.BUY, Command.DEL, Command.BUY]
        assert book[2].order == Order(1, 1, 3, 10)

    def test_increase_or_price_change_loses_priority(self):
        for qty, price in ((7, 10), (3, 11)):
            raw = [RawInstruction(Kind.BUY, 1, 1, 5, 10), RawInstruction(Kind.UPDATE_BUY, 1, 2, qty, price)]
            assert preprocess(raw).instructions[2].order.timestamp == 3

    def test_retained_priority_beats_later_competitor(self):
        # id1 placed first, id2 second at the same price, then id1 shrinks.
        raw = [
            RawInstruction(Kind.BUY, 1, 10, 5, 10),
            RawInstruction(Kind.BUY, 2, 20, 5, 10),
            RawInstruction(Kind.UPDATE_BUY, 1, 30, 3, 10),
            RawInstruction(Kind.SELL, 3, 40, 3, 10),
        ]
        book = preprocess(raw)
        steps, _ = replay(book)
        assert steps[-1] == (T(1, 3, 3),)
        replacement = book.instructions[3].order
        assert more_competitive_bid(replacement, book.instructions[1].order)

    def test_market_orders(self):
        book = preprocess([RawInstruction(Kind.MARKET_SELL, 2, 2, 3), RawInstruction(Kind.MARKET_BUY, 3, 3, 1)])
        assert book.instructions[0] == Instruction.sell(2, 1, 3, 0)
        assert book.instructions[1].order.price == MAX_TICK

    def test_ioc(self):
        book = preprocess([RawInstruction(Kind.IOC_BUY, 3, 3, 4, 9)])
        assert [i.command for i in book.instructions] == [Command.BUY, Command.DEL]
        assert book.instructions[1].order.id == 3
        assert book.trade_step == {3: 0}

    def test_stop_repositioned_after_trigger(self):
        raw = [
            RawInstruction(Kind.STOP_SELL, 9, 10, 1, 5, trigger_timestamp=30),
            RawInstruction(Kind.BUY, 1, 20, 1, 1),
            RawInstruction(Kind.BUY, 2, 30, 1, 1),
            RawInstruction(Kind.BUY, 3, 40, 1, 1),
        ]
        book = preprocess(raw)
        assert [i.order.id for i in book.instructions] == [1, 2, 9, 3]
        assert [i.order.timestamp for i in book.instructions] == [1, 2, 3, 4]
        assert book.trade_step[10] == 2

    def test_stop_trigger_before_placement(self):
        with pytest.raises(PreprocessError, match="precedes"):
            preprocess([RawInstruction(Kind.STOP_BUY, 1, 10, 1, 1, trigger_timestamp=5)])

    def test_raw_timestamps_must_increase(self):
        with pytest.raises(PreprocessError, match="not after"):
            preprocess([RawInstruction(Kind.BUY, 1, 10, 1, 1), RawInstruction(Kind.BUY, 2, 10, 1, 1)])

    def test_unknown_delete_warns_or_fails(self):
        raw = [RawInstruction(Kind.DELETE, 5, 1), RawInstruction(Kind.SELL, 5, 2, 1, 1)]
        book = preprocess(raw)
        assert len(book.warnings) == 1 and "never placed" in book.warnings[0]
        with pytest.raises(PreprocessError, match="never placed"):
            preprocess(raw, strict=True)

    def test_update_of_other_side(self):
        raw = [RawInstruction(Kind.SELL, 1, 1, 1, 1), RawInstruction(Kind.UPDATE_BUY, 1, 2, 1, 1)]
        with pytest.raises(PreprocessError, match="other side"):
            preprocess(raw)

    def test_generated_streams(self):
        for seed in range(30):
            raw = generate_raw_stream(GenParams(seed=seed, num_instructions=300))
            book = preprocess(raw, strict=True)
            assert len(book) <= 2 * len(raw)
            # positions strictly increase and every step is a legal input
            eng = ReplayEngine()
            for instr in book.instructions:
                eng.step(instr)
            # relative order kept apart from stops
            plain = [r.timestamp for r in raw if not r.kind.name.startswith("STOP")]
            seen = []
            for ts in book.source_ts:
                if ts in plain and (not seen or seen[-1] != ts):
                    seen.append(ts)
            assert seen == plain


class TestGrouping:
    BOOK = [Instruction.buy(1, 1, 5, 10), Instruction.sell(2, 2, 3, 8), Instruction.delete(1, 3)]

    def test_grouped(self):
        steps = group_trades_by_step([TradeRecord(2, 1, 2, 3)], self.BOOK)
        assert steps == [[], [T(1, 2, 3)], []]

    def test_no_trades(self):
        assert group_trades_by_step([], self.BOOK) == [[], [], []]

    def test_orphan(self):
        with pytest.raises(LogFormatError, match="matches no instruction") as e:
            group_trades_by_step(parse_trade_book("99,1,2,3\n"), self.BOOK)
        assert e.value.diagnostics[0].line == 1


def test_raw_primitive_path_keeps_timestamps():
    book = generate_book(GenParams(seed=4, num_instructions=50))
    text = format_order_book(instructions_to_raw(book))
    prepared = from_raw_primitives(parse_order_book(text))
    assert prepared.instructions == book


def test_raw_path_rejects_complex_kinds():
    with pytest.raises(PreprocessError, match="not allowed in raw mode"):
        from_raw_primitives([RawInstruction(Kind.IOC_BUY, 1, 1, 1, 1)])


def test_untraded_hint_warning_at_check_time():
    raw = [
        RawInstruction(Kind.BUY, 1, 1, 5, 10),
        RawInstruction(Kind.SELL, 2, 2, 2, 10),
        RawInstruction(Kind.UPDATE_BUY, 1, 3, 2, 10, untraded_qty=4),
    ]
    book = preprocess(raw)
    steps, _ = replay(book)
    report = check_logs(book, steps)
    assert report.verdict.value == "Match"
    assert any("claims 4 untraded, replay holds 3" in w for w in report.warnings)
    records = trades_to_records(book, steps)
    assert records == [TradeRecord(2, 1, 2, 2)]


def test_reuse_after_delete_is_not_flagged():
    raw = [RawInstruction(Kind.BUY, 1, 1, 5, 10), RawInstruction(Kind.DELETE, 1, 2), RawInstruction(Kind.SELL, 1, 3, 2, 12)]
    assert preprocess(raw, strict=True).warnings == []
    again = [RawInstruction(Kind.BUY, 1, 1, 5, 10), RawInstruction(Kind.SELL, 1, 3, 2, 12)]
    with pytest.raises(PreprocessError, match="placed again"):
        preprocess(again, strict=True)


def test_generated_books_preprocess_without_warnings():
    for seed in range(10):
        book = generate_book(GenParams(seed=seed, num_instructions=400, reuse_probability=0.3))
        prepared = preprocess(parse_order_book(format_order_book(instructions_to_raw(book))), strict=True)
        assert prepared.warnings == []
