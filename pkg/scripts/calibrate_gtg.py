#!/usr/bin/env python3
"""Find the GTG weight scale giving ~1600 directed edges at n=100, theta=30.

Edge count is monotone in the weight scale, so a bisection over the scale
on a fixed seed set is enough.  Prints the mean count at the frozen default
and at the calibrated value.
"""
import argparse

import numpy as np

from ume.benchgen import GTG_WEIGHT_SCALE, GtgConfig, gtg_generate


def mean_edges(scale, seeds, n, theta):
    return float(np.mean([gtg_generate(GtgConfig(n=n, theta=theta, weight_scale=scale, seed=s)).n_edges
                          for s in seeds]))


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--target", type=float, default=1600.0)
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--theta", type=float, default=30.0)
    args = p.parse_args()
    seeds = range(args.seeds)

    lo, hi = 0.5, 2.0
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if mean_edges(mid, seeds, args.n, args.theta) < args.target:
            lo = mid
        else:
            hi = mid
    scale = round(0.5 * (lo + hi), 2)
    print(f"unit scale:       {mean_edges(1.0, seeds, args.n, args.theta):8.1f} edges")
    print(f"calibrated scale: {scale} -> {mean_edges(scale, seeds, args.n, args.theta):8.1f} edges")
    print(f"frozen default:   {GTG_WEIGHT_SCALE} -> "
          f"{mean_edges(GTG_WEIGHT_SCALE, seeds, args.n, args.theta):8.1f} edges")


if __name__ == "__main__":
    main()
