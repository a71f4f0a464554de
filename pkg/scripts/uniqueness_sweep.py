"""Replay many generated books with the engine and the naive rescan engine
and report the first step where they disagree, if any."""

import argparse
import random
import time
from dataclasses import dataclass

from cdacheck.engine import run_book
from cdacheck.oracle import GenParams, alt_run_book, generate_book


@dataclass(frozen=True)
class SweepConfig:
    seed: int = 3
    books: int = 200
    min_len: int = 500
    max_len: int = 2000
    del_probability: float = 0.3
    buy_probability: float = 0.35


def sweep(cfg: SweepConfig) -> tuple[int, list[tuple[int, int]]]:
    rng = random.Random(cfg.seed)
    steps, bad = 0, []
    for _ in range(cfg.books):
        p = GenParams(
            seed=rng.randrange(2**32),
            num_instructions=rng.randint(cfg.min_len, cfg.max_len),
            del_probability=cfg.del_probability,
            buy_probability=cfg.buy_probability,
        )
        book = generate_book(p)
        for k, (x, y) in enumerate(zip(run_book(book), alt_run_book(book))):
            steps += 1
            if x.normalized() != y.normalized():
                bad.append((p.seed, k))
                break
    return steps, bad


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=SweepConfig.seed)
    ap.add_argument("--books", type=int, default=SweepConfig.books)
    ap.add_argument("--del-prob", type=float, default=SweepConfig.del_probability)
    ap.add_argument("--buy-prob", type=float, default=SweepConfig.buy_probability)
    args = ap.parse_args()
    cfg = SweepConfig(seed=args.seed, books=args.books, del_probability=args.del_prob, buy_probability=args.buy_prob)
    start = time.perf_counter()
    steps, bad = sweep(cfg)
    print(f"{cfg.books} books, {steps} steps, {len(bad)} disagreements, {time.perf_counter() - start:.1f}s")
    for seed, k in bad[:10]:
        print(f"  book seed {seed} diverges at step {k}")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
