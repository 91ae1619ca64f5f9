#!/usr/bin/env python3
"""Simulated vs analytic error over the (M, P) grid.

Runs the M in 16..100, P in 1..5 cross product at a unit-capacity bottleneck
and writes the sweep CSV with xi_sim / xi_analytic / xi_empirical columns for
overlay plots.

Usage: python scripts/portion_grid.py [--seeds 0:6] [--out grid.csv]
"""

import argparse

from abprobe.cli import _parse_int_list
from abprobe.experiment import RunConfig, sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=_parse_int_list, default=list(range(6)))
    ap.add_argument("--packets", type=_parse_int_list, default=list(range(16, 101, 6)))
    ap.add_argument("--portions", type=_parse_int_list, default=[1, 2, 3, 4, 5])
    ap.add_argument("--sequences", type=int, default=1000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="portion_grid.csv")
    args = ap.parse_args()

    base = RunConfig(capacity=1.0, packet_size=7.5e-4, sequences=args.sequences)
    rows = sweep(
        base,
        packets=args.packets,
        portions=args.portions,
        seeds=args.seeds,
        max_workers=args.workers,
        out=args.out,
    )
    for p in args.portions:
        meds = [
            (r["M"], r["xi_sim"])
            for r in rows
            if r["P"] == p and r["seed"] == "median"
        ]
        first, last = meds[0], meds[-1]
        print(f"P={p}: median xi {first[1]:.5f} (M={first[0]}) -> {last[1]:.5f} (M={last[0]})")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
