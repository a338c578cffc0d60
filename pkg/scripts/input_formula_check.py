"""Worst relative gap between simulated node input and its sup-over-paths representation."""

import argparse

import numpy as np

from gaussnet.io import load_network
from gaussnet.montecarlo import SimGrid, input_formula_sides, sample_gaussian_paths


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("network")
    ap.add_argument("--node", required=True)
    ap.add_argument("--realizations", type=int, default=50)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--method", choices=["dp", "enumerate"], default="dp")
    args = ap.parse_args()
    nd = load_network(args.network)
    i = nd.index(args.node)
    grid = SimGrid(-5.0, 0.0, 0.1)
    worst = 0.0
    for r in range(args.realizations):
        paths = sample_gaussian_paths(nd.net, nd.kernel, grid, args.n, np.random.SeedSequence([args.n, r]))
        lhs, rhs = input_formula_sides(nd.net, paths, args.n, grid, i, range(grid.zero_index()), args.method)
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        gap = np.abs(lhs - rhs) / np.where(scale > 0, scale, 1.0)
        worst = max(worst, float(gap.max()))
    print(f"node {args.node}: {args.realizations} realizations, worst relative gap {worst:.3e}")


if __name__ == "__main__":
    main()
