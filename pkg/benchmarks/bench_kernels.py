"""Benchmark the compiled LCS kernel against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--pairs N] [--length L]
"""

from __future__ import annotations

import argparse
import random
import time

from schoolsim import _kernels


def make_pairs(n_pairs: int, length: int, vocab: int, seed: int) -> list[tuple[list[str], list[str]]]:
    rng = random.Random(seed)
    words = [f"w{i}" for i in range(vocab)]
    return [
        (
            [rng.choice(words) for _ in range(rng.randint(length // 2, length))],
            [rng.choice(words) for _ in range(rng.randint(length // 2, length))],
        )
        for _ in range(n_pairs)
    ]


def bench(fn, pairs) -> tuple[float, int]:
    start = time.perf_counter()
    checksum = 0
    for x, y in pairs:
        checksum += fn(x, y)
    return time.perf_counter() - start, checksum


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=2000)
    parser.add_argument("--length", type=int, default=60)
    parser.add_argument("--vocab", type=int, default=40)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    pairs = make_pairs(args.pairs, args.length, args.vocab, args.seed)
    pure_time, pure_sum = bench(_kernels.lcs_length_pure, pairs)
    print(f"pure python : {pure_time:8.3f} s  (checksum {pure_sum})")
    if _kernels.HAVE_NATIVE:
        native_time, native_sum = bench(_kernels.lcs_length_native, pairs)
        assert native_sum == pure_sum, "backends disagree"
        print(f"compiled    : {native_time:8.3f} s  (checksum {native_sum})")
        print(f"speedup     : {pure_time / native_time:8.1f}x")
    else:
        print("compiled    : not built (install with the Cython extension)")


if __name__ == "__main__":
    main()
