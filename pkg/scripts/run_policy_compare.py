#!/usr/bin/env python3
"""Replay one workload under each eviction policy and print the grid."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from halopart import (SimConfig, build_partition_set, compare_policies,
                      erdos_renyi, prepartition, reference_profiles)


def main() -> int:
    parser = argparse.ArgumentParser(
        description="jaca vs fifo vs lru at a few capacities.")
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--degree", type=float, default=10.0)
    parser.add_argument("--partitions", type=int, default=4)
    parser.add_argument("--hops", type=int, default=1)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--fractions", type=float, nargs="+",
                        default=[0.25, 0.5, 0.75],
                        help="Capacities as fractions of the largest halo.")
    parser.add_argument("--out", default="results/policy_compare.csv")
    args = parser.parse_args()

    g = erdos_renyi(args.n, args.degree, seed=args.seed)
    assignment = prepartition(g, args.partitions, method="greedy_multilevel",
                              seed=args.seed)
    ps = build_partition_set(g, assignment, hops=args.hops)
    h_max = max(len(h) for h in ps.halo)
    capacities = sorted({max(1, int(f * h_max)) for f in args.fractions})

    profiles = reference_profiles()[:args.partitions]
    cfg = SimConfig(epochs=args.epochs, f_dim=(64, 64), L=2, seed=args.seed)
    table = compare_policies(g, ps, profiles, cfg,
                             policies=("jaca", "fifo", "lru"),
                             capacities=capacities)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(table.to_csv())

    print(f"largest halo = {h_max}")
    print(f"{'policy':8s} {'capacity':>9s} {'local':>7s} {'global':>7s} "
          f"{'fwd GiB':>9s} {'makespan':>10s}")
    for r in table.rows:
        print(f"{r.policy:8s} {r.capacity:9d} {r.hit_rate_local:7.3f} "
              f"{r.hit_rate_global:7.3f} {r.fwd_bytes / 2**30:9.3f} "
              f"{r.makespan:10.3f}")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
