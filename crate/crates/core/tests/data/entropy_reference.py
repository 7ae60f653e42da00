"""Regenerates entropy_reference.tsv with 50-digit mpmath arithmetic.

Columns: total prev next shared H(prev) H(next) H(prev|next)
"""
import random

from mpmath import mp, mpf, log

mp.dps = 50


def xlnx(x):
    return mpf(0) if x == 0 else x * log(x)


def entropy(covered, total):
    p = mpf(covered) / total
    return -(xlnx(p) + xlnx(1 - p))


def conditional(prev, nxt, shared, total):
    u = mpf(prev + nxt - 2 * shared) / prev
    v = mpf(shared) / prev
    return -(mpf(prev) / total) * (xlnx(u) + xlnx(v))


def main():
    rng = random.Random(20240611)
    rows = []
    for _ in range(1000):
        total = rng.randint(2, 400)
        prev = rng.randint(1, total)
        nxt = rng.randint(1, total)
        lo = max(0, prev + nxt - total)
        shared = rng.randint(lo, min(prev, nxt))
        rows.append((total, prev, nxt, shared))
    with open("entropy_reference.tsv", "w") as f:
        for total, prev, nxt, shared in rows:
            vals = [entropy(prev, total), entropy(nxt, total), conditional(prev, nxt, shared, total)]
            f.write("\t".join([str(total), str(prev), str(nxt), str(shared)] + [mp.nstr(v, 30) for v in vals]) + "\n")


if __name__ == "__main__":
    main()
