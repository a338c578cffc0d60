"""Numerical exponent against the closed form on equal-Hurst tandems, across H and mu_1."""

import argparse
import csv
import sys

import numpy as np

from gaussnet import MfBmKernel, Network
from gaussnet.deviations import closed_form_fbm, decay_lower_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--hurst", default="0.3,0.5,0.7,0.9")
    ap.add_argument("--mu1", default="1.5,2,3,5")
    ap.add_argument("--b", type=float, default=1.0)
    args = ap.parse_args()
    out = csv.writer(sys.stdout)
    out.writerow(["H", "mu1", "closed_form", "numerical", "rel_err", "condition_holds", "case"])
    for h in map(float, args.hurst.split(",")):
        kern = MfBmKernel(np.full(2, h), np.ones(2), np.eye(2))
        for mu1 in map(float, args.mu1.split(",")):
            net = Network.from_edges([mu1, 2.0], [1.0, 0.5], [(0, 1, 1.0)])
            cf = closed_form_fbm(net, kern, 1, args.b)
            res = decay_lower_bound(net, kern, 1, args.b)
            rel = abs(res.exponent - cf.exponent) / cf.exponent
            out.writerow([h, mu1, f"{cf.exponent:.10g}", f"{res.exponent:.10g}", f"{rel:.2e}",
                          cf.condition_holds, res.active_case])


if __name__ == "__main__":
    main()
