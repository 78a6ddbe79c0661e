#!/usr/bin/env python3
"""Independent oracle for the separation check.

Reads "label,overall" rows and prints the brute-force pairwise AUC
(pristine positive, ties 1/2) and the base-2 Jensen-Shannon divergence of
the two equal-width histograms over [1, 5] as JSON.
"""

import csv
import json
import math
import sys


def histogram(xs, bins):
    counts = [0] * bins
    for x in xs:
        i = int(math.floor((x - 1.0) * bins / 4.0))
        counts[min(i, bins - 1)] += 1
    return [c / len(xs) for c in counts]


def kl(p, m):
    return sum(pi * math.log2(pi / mi) for pi, mi in zip(p, m) if pi > 0)


def main():
    path, bins = sys.argv[1], int(sys.argv[2])
    pos, neg = [], []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            (pos if row["label"] == "pristine" else neg).append(float(row["overall"]))

    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    auc = wins / (len(pos) * len(neg))

    hp, hq = histogram(pos, bins), histogram(neg, bins)
    m = [(a + b) / 2 for a, b in zip(hp, hq)]
    jsd = 0.5 * kl(hp, m) + 0.5 * kl(hq, m)

    json.dump({"auc": auc, "jsd": jsd, "pristine": len(pos), "injected": len(neg)}, sys.stdout)
    print()


if __name__ == "__main__":
    main()
