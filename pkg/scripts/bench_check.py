"""Time the trade-log check against book length."""

import argparse
import statistics
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from cdacheck import cli


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple[int, ...] = (1000, 4000, 16000, 64000)
    repeats: int = 3
    seed: int = 1


def bench(cfg: BenchConfig) -> list[tuple[int, float, float]]:
    rows = []
    with tempfile.TemporaryDirectory() as tmp:
        for n in cfg.sizes:
            orders, trades = Path(tmp, f"o{n}.csv"), Path(tmp, f"t{n}.csv")
            cli.main(["gen", "--seed", str(cfg.seed), "--n", str(n), "--out-orders", str(orders), "--out-trades", str(trades)])
            times = []
            for _ in range(cfg.repeats):
                start = time.perf_counter()
                rc = cli.run_check(str(orders), str(trades))
                times.append(time.perf_counter() - start)
                assert rc.verdict.value == "Match", rc.error
            rows.append((n, statistics.median(times), max(times)))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=list(BenchConfig.sizes))
    ap.add_argument("--repeats", type=int, default=BenchConfig.repeats)
    ap.add_argument("--seed", type=int, default=BenchConfig.seed)
    args = ap.parse_args()
    cfg = BenchConfig(sizes=tuple(args.sizes), repeats=args.repeats, seed=args.seed)
    print(f"{'n':>8} {'median s':>10} {'max s':>8} {'us/instr':>9}")
    for n, med, worst in bench(cfg):
        print(f"{n:>8} {med:>10.3f} {worst:>8.3f} {1e6 * med / n:>9.1f}")


if __name__ == "__main__":
    main()
