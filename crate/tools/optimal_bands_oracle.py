#!/usr/bin/env python3
"""Exhaustive LSH banding search, independent of the Rust implementation.

For every (bands, rows) with bands * rows <= num_perm, computes
    0.5 * int_0^t P(s) ds + 0.5 * int_t^1 (1 - P(s)) ds,   P(s) = 1 - (1 - s^rows)^bands
with a 1000-point midpoint rule and keeps the first minimum in
(bands ascending, rows ascending) order.

Usage: optimal_bands_oracle.py NUM_PERM THRESHOLD
"""
import json
import sys

import numpy as np

POINTS = 1000


def midpoint(f, a, b):
    h = (b - a) / POINTS
    xs = a + (np.arange(POINTS) + 0.5) * h
    return float(np.sum(f(xs)) * h)


def search(num_perm, t):
    best = None
    for b in range(1, num_perm + 1):
        for r in range(1, num_perm // b + 1):
            p = lambda s: 1.0 - (1.0 - s ** r) ** b
            fp = midpoint(p, 0.0, t)
            fn = midpoint(lambda s: 1.0 - p(s), t, 1.0)
            err = 0.5 * fp + 0.5 * fn
            if best is None or err < best[2]:
                best = (b, r, err, fp, fn)
    return best


if __name__ == "__main__":
    num_perm = int(sys.argv[1])
    t = float(sys.argv[2])
    b, r, err, fp, fn = search(num_perm, t)
    print(json.dumps({"num_perm": num_perm, "threshold": t, "bands": b, "rows": r,
                      "objective": err, "false_positive": fp, "false_negative": fn}))
