#!/usr/bin/env python3
"""Data for the two scaling plots: evaluations against budget and against |E|.

The budget sweep reads per-step cumulative counts from budget-10 runs (both
solvers use the budget only as a stopping rule).  The threshold sweep runs
theta = 50, 45, ..., 20 at budget 10.  Output is CSV for external plotting.
"""
import argparse
import csv
from dataclasses import replace
from pathlib import Path

from ume import bench


def write_points(path, rows, key):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["solver", key, "mean", "std", "cv", "count"] +
                   (["mean_edges"] if key == "theta" else []))
        for solver, block in rows.items():
            for pt in block["points"]:
                w.writerow([solver, pt[key], pt["mean"], pt["std"], pt["cv"], pt["count"]] +
                           ([pt["mean_edges"]] if key == "theta" else []))


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--greedy-seeds", type=int, default=10,
                   help="seeds per threshold for the (slow) basic greedy")
    p.add_argument("--thetas", type=float, nargs="+", default=[50, 45, 40, 35, 30, 25, 20])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("fig2"))
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    cfg = bench.ProtocolConfig()

    results = bench.run_suite(range(args.seeds), cfg, workers=args.workers)
    budget = bench.budget_sweep(results, range(1, cfg.budget + 1))
    write_points(args.out / "budget_sweep.csv", budget, "budget")
    for solver, block in budget.items():
        print(f"budget sweep {solver:>8}: log-log slope {block['loglog_slope']:.3f}, "
              f"mean CV {block['mean_cv']:.2f}")

    runs = []
    for theta in args.thetas:
        t_cfg = replace(cfg, theta=theta)
        runs += bench.run_suite(range(args.seeds), replace(t_cfg, solvers=("priority",)), args.workers)
        runs += bench.run_suite(range(args.greedy_seeds), replace(t_cfg, solvers=("greedy",)),
                                args.workers)
    sweep = bench.theta_sweep(runs)
    write_points(args.out / "theta_sweep.csv", sweep, "theta")
    for solver, block in sweep.items():
        print(f"theta sweep  {solver:>8}: max/min mean evals {block['max_min_ratio']:.2f}, "
              f"slope vs |E| {block['edges_slope']:.3f}")
    print(f"CSV written to {args.out}/")


if __name__ == "__main__":
    main()
