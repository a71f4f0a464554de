import json

import pytest

from cdacheck import cli
from cdacheck.checker import Verdict, check_logs, replay
from cdacheck.core import Instruction, Transaction as T
from cdacheck.logio import format_order_book, format_trade_book, group_trades_by_step, preprocess
from cdacheck.oracle import GenParams, delete_before_insert_fixture, generate_book, mutate_trade_log


def engine_log(book):
    steps, _ = replay(book)
    return [list(s) for s in steps]


class TestCheckLogs:
    BOOK = generate_book(GenParams(seed=21, num_instructions=300))

    def test_self_consistency(self):
        report = check_logs(self.BOOK, engine_log(self.BOOK))
        assert report.verdict is Verdict.MATCH
        assert report.instructions == 300
        assert report.volume == sum(t.qty for s in engine_log(self.BOOK) for t in s)

    def test_qty_plus_one_reports_negative_delta(self):
        steps = engine_log(self.BOOK)
        k = next(i for i, s in enumerate(steps) if s)
        t = steps[k][0]
        steps[k][0] = T(t.bid_id, t.ask_id, t.qty + 1)
        report = check_logs(self.BOOK, steps)
        assert report.verdict is Verdict.MISMATCH
        assert report.mismatch_step == k
        assert report.first.diff == {(t.bid_id, t.ask_id): -1}

    def test_all_mismatches_continues(self):
        steps = engine_log(self.BOOK)
        filled = [i for i, s in enumerate(steps) if s]
        for k in filled[:3]:
            steps[k] = []
        assert len(check_logs(self.BOOK, steps).mismatches) == 1
        assert [m.step for m in check_logs(self.BOOK, steps, all_mismatches=True).mismatches] == filled[:3]

    def test_max_steps(self):
        report = check_logs(self.BOOK, engine_log(self.BOOK), max_steps=10)
        assert report.instructions == 10

    def test_illegal_input_is_not_a_mismatch(self):
        book = [Instruction.buy(1, 1, 1, 5), Instruction.sell(1, 2, 1, 9)]
        report = check_logs(book, [[], []])
        assert report.verdict is Verdict.INPUT_ERROR
        assert report.error_step == 1 and "duplicate id" in report.error

    def test_misaligned(self):
        with pytest.raises(ValueError):
            check_logs(self.BOOK, [])

    def test_delete_before_insert_anomaly(self):
        rows, trades = delete_before_insert_fixture()
        book = preprocess(rows)
        report = check_logs(book, group_trades_by_step(trades, book))
        assert report.verdict is Verdict.MISMATCH
        assert report.first.timestamp == 40
        assert report.first.expected == (T(8, 7, 3),) and report.first.actual == ()


@pytest.fixture
def fixture_pair(tmp_path):
    orders, trades = tmp_path / "orders.csv", tmp_path / "trades.csv"
    rc = cli.main(["gen", "--seed", "3", "--n", "400", "--out-orders", str(orders), "--out-trades", str(trades)])
    assert rc == 0
    return orders, trades


class TestCli:
    def test_check_generated_pair(self, fixture_pair, capsys):
        orders, trades = fixture_pair
        assert cli.main(["check", "--orders", str(orders), "--trades", str(trades)]) == 0
        assert "MATCH" in capsys.readouterr().out

    def test_replay_output_checks_clean(self, fixture_pair, tmp_path):
        orders, _ = fixture_pair
        produced = tmp_path / "replayed.csv"
        assert cli.main(["replay", "--orders", str(orders), "--emit-trades", str(produced)]) == 0
        assert cli.main(["check", "--orders", str(orders), "--trades", str(produced)]) == 0
        assert cli.main(["check", "--raw", "--orders", str(orders), "--trades", str(produced)]) == 0

    def test_replay_residents(self, tmp_path, capsys):
        orders = tmp_path / "o.csv"
        orders.write_text("BUY,1,1,5,10\nSELL,2,2,3,8\nSELL,3,3,4,12\n")
        assert cli.main(["replay", "--orders", str(orders), "--emit-residents"]) == 0
        assert capsys.readouterr().out.splitlines() == ["BID,1,1,2,10", "ASK,3,3,4,12"]

    def test_replay_to_stdout(self, tmp_path, capsys):
        orders = tmp_path / "o.csv"
        orders.write_text("BUY,1,1,5,10\nSELL,2,2,3,8\n")
        assert cli.main(["replay", "--orders", str(orders), "--raw"]) == 0
        assert capsys.readouterr().out == "2,1,2,3\n"

    @pytest.mark.parametrize("kind", ["drop", "qty", "swap", "move"])
    def test_mutated_pair_exits_one(self, tmp_path, capsys, kind):
        orders, trades = tmp_path / "o.csv", tmp_path / "t.csv"
        rc = cli.main(["gen", "--seed", "9", "--n", "300", "--out-orders", str(orders), "--out-trades", str(trades), "--mutate", kind])
        assert rc == 0
        mutated = int(capsys.readouterr().out.split()[2])
        assert cli.main(["check", "--json", "--orders", str(orders), "--trades", str(trades)]) == 1
        report = json.loads(capsys.readouterr().out)
        assert report["verdict"] == "Mismatch"
        assert report["mismatch_step"]["index"] <= mutated

    def test_missing_file_exits_two(self, tmp_path, capsys):
        rc = cli.main(["check", "--orders", str(tmp_path / "missing.csv"), "--trades", str(tmp_path / "t.csv")])
        assert rc == 2
        assert "INPUT ERROR" in capsys.readouterr().out

    def test_bad_row_exits_two(self, tmp_path):
        orders, trades = tmp_path / "o.csv", tmp_path / "t.csv"
        orders.write_text("BUY,1,1,0,10\n")
        trades.write_text("")
        assert cli.main(["check", "--orders", str(orders), "--trades", str(trades)]) == 2

    def test_orphan_trade_exits_two(self, tmp_path):
        orders, trades = tmp_path / "o.csv", tmp_path / "t.csv"
        orders.write_text("BUY,1,1,1,10\n")
        trades.write_text("99,1,2,1\n")
        assert cli.main(["check", "--orders", str(orders), "--trades", str(trades)]) == 2

    def test_raw_mode_rejects_unstructured(self, tmp_path, capsys):
        orders, trades = tmp_path / "o.csv", tmp_path / "t.csv"
        orders.write_text("BUY,1,2,1,10\nSELL,2,1,1,12\n")
        trades.write_text("")
        assert cli.main(["check", "--raw", "--orders", str(orders), "--trades", str(trades)]) == 2
        assert "not structured" in capsys.readouterr().out

    def test_usage_errors_exit_two(self, capsys):
        assert cli.main([]) == 2
        assert cli.main(["check"]) == 2
        assert "usage" in capsys.readouterr().err
        assert cli.main(["check", "--raw", "--preprocess", "--orders", "a", "--trades", "b"]) == 2

    def test_json_is_stable(self, fixture_pair, capsys):
        orders, trades = fixture_pair
        outs = []
        for _ in range(2):
            cli.main(["check", "--json", "--orders", str(orders), "--trades", str(trades)])
            report = json.loads(capsys.readouterr().out)
            report.pop("timing")
            outs.append(json.dumps(report, sort_keys=True))
        assert outs[0] == outs[1]
        assert json.loads(outs[0])["stats"]["instructions"] == 400

    def test_multiple_pairs(self, tmp_path, capsys):
        paths = []
        for seed, mutate in ((1, None), (2, "drop")):
            o, t = tmp_path / f"o{seed}.csv", tmp_path / f"t{seed}.csv"
            argv = ["gen", "--seed", str(seed), "--n", "200", "--out-orders", str(o), "--out-trades", str(t)]
            cli.main(argv + (["--mutate", mutate] if mutate else []))
            paths += [o, t]
        capsys.readouterr()
        rc = cli.main(["check", "--json", "--orders", str(paths[0]), "--trades", str(paths[1]),
                       "--orders", str(paths[2]), "--trades", str(paths[3])])
        assert rc == 1
        verdicts = [r["verdict"] for r in json.loads(capsys.readouterr().out)]
        assert verdicts == ["Match", "Mismatch"]

    def test_unequal_pair_counts(self, fixture_pair):
        orders, trades = fixture_pair
        assert cli.main(["check", "--orders", str(orders), "--orders", str(orders), "--trades", str(trades)]) == 2

    def test_human_mismatch_report(self, tmp_path, capsys):
        orders, trades = tmp_path / "o.csv", tmp_path / "t.csv"
        orders.write_text("BUY,1,1,5,10\nSELL,2,2,3,8\n")
        trades.write_text("2,1,2,4\n")
        assert cli.main(["check", "--orders", str(orders), "--trades", str(trades)]) == 1
        out = capsys.readouterr().out
        assert "step 1 (timestamp 2)" in out
        assert "bid 1 ask 2: expected - actual = -1" in out

    def test_delete_before_insert_both_paths(self, tmp_path, capsys):
        rows, trades = delete_before_insert_fixture()
        o, t = tmp_path / "o.csv", tmp_path / "t.csv"
        o.write_text(format_order_book(rows))
        t.write_text(format_trade_book(trades))
        assert cli.main(["check", "--orders", str(o), "--trades", str(t)]) == 1
        assert "never placed" in capsys.readouterr().out
        assert cli.main(["check", "--strict", "--orders", str(o), "--trades", str(t)]) == 2

    def test_selfcheck(self, capsys):
        assert cli.main(["selfcheck", "--seed", "4", "--n", "300"]) == 0
        assert "0 failures" in capsys.readouterr().out

    def test_gen_unmutatable(self, tmp_path):
        rc = cli.main(["gen", "--seed", "1", "--n", "0", "--out-orders", str(tmp_path / "o"), "--out-trades", str(tmp_path / "t"), "--mutate", "drop"])
        assert rc == 2

    def test_internal_failure_exits_three(self, monkeypatch, fixture_pair):
        def boom(*a, **k):
            raise AssertionError("equal competitiveness among residents")

        monkeypatch.setattr(cli, "check_logs", boom)
        orders, trades = fixture_pair
        assert cli.main(["check", "--orders", str(orders), "--trades", str(trades)]) == 3

    def test_mutation_harness_exercises_log_shape(self):
        book = generate_book(GenParams(seed=5, num_instructions=200))
        steps = engine_log(book)
        log, k = mutate_trade_log(steps, "drop", 1)
        assert check_logs(book, log).mismatch_step == k


def test_strict_accepts_generated_pair(fixture_pair, capsys):
    orders, trades = fixture_pair
    assert cli.main(["check", "--strict", "--orders", str(orders), "--trades", str(trades)]) == 0
    assert "warning" not in capsys.readouterr().out
