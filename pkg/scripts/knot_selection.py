#!/usr/bin/env python3
"""Frequency of knot combinations chosen by the PE criterion on the s1 scenario.

    python scripts/knot_selection.py [--runs 200] [--n 100 400] [--max-knots 7]
"""
import argparse
import warnings
from collections import Counter

import numpy as np

from gaplm.sim import generate_s1, select_knots


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--n", type=int, nargs="+", default=[100, 400])
    ap.add_argument("--max-knots", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--top", type=int, default=10)
    args = ap.parse_args()
    cand = [range(args.max_knots + 1)] * 2
    for n in args.n:
        counts = Counter()
        for ss in np.random.SeedSequence([args.seed, n]).spawn(args.runs):
            data, truth = generate_s1(n, np.random.default_rng(ss))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                counts[select_knots(data, cand, "pe", truth).J] += 1
        print(f"# n={n}, {args.runs} runs")
        print("J1\tJ2\tcount")
        for J, c in counts.most_common(args.top):
            print(f"{J[0]}\t{J[1]}\t{c}")


if __name__ == "__main__":
    main()
