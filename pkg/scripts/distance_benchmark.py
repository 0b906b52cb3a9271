"""Time the condensed distance matrix over random banks of growing size."""

import argparse
import random
import time

from trajmine.distance import distance_matrix
from trajmine.model import EventAlphabet, Sequence, SequenceBank

CODES = ["ARR", "BLD", "DMF", "HEM", "HEP", "HTN", "INF", "NEU", "REN", "RHF", "RSP"]


def random_bank(n, mean_len, seed):
    rng = random.Random(seed)
    seqs = tuple(
        Sequence(f"{i:06d}", tuple(rng.choice(CODES) for _ in range(rng.randint(1, 2 * mean_len - 1))))
        for i in range(n)
    )
    return SequenceBank(EventAlphabet.default(), seqs)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000, 4000])
    ap.add_argument("--mean-len", type=int, default=5)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    distance_matrix(random_bank(10, args.mean_len, args.seed))  # compile / load cache
    print(f"{'n':>7} {'pairs':>12} {'seconds':>9} {'Mpairs/s':>9}")
    for n in args.sizes:
        bank = random_bank(n, args.mean_len, args.seed)
        t0 = time.perf_counter()
        m = distance_matrix(bank, workers=args.workers)
        dt = time.perf_counter() - t0
        print(f"{n:>7} {m.values.size:>12} {dt:>9.3f} {m.values.size / dt / 1e6:>9.2f}")


if __name__ == "__main__":
    main()
