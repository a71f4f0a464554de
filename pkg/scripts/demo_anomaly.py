"""Write the delete-before-insert example to disk and check it in default
and strict mode."""

import argparse
from pathlib import Path

from cdacheck import cli
from cdacheck.logio import format_order_book, format_trade_book
from cdacheck.oracle import delete_before_insert_fixture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="anomaly", help="directory for the two CSV files")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, trades = delete_before_insert_fixture()
    orders_path, trades_path = out / "orders.csv", out / "trades.csv"
    orders_path.write_text(format_order_book(rows))
    trades_path.write_text(format_trade_book(trades))
    for extra in ([], ["--strict"]):
        argv = ["check", *extra, "--orders", str(orders_path), "--trades", str(trades_path)]
        print("$ cdacheck " + " ".join(argv))
        print(f"exit {cli.main(argv)}\n")


if __name__ == "__main__":
    main()
