"""Exponent and active case at the downstream queue of a tandem as mu_1 shrinks toward saturation."""

import argparse
import csv
import sys

import numpy as np

from gaussnet import MfBmKernel, Network
from gaussnet.deviations import check_tightness, decay_lower_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--hurst", type=float, default=0.5)
    ap.add_argument("--mu2", type=float, default=2.0)
    ap.add_argument("--points", type=int, default=12)
    ap.add_argument("--b", type=float, default=1.0)
    args = ap.parse_args()
    kern = MfBmKernel(np.full(2, args.hurst), np.ones(2), np.eye(2))
    out = csv.writer(sys.stdout)
    out.writerow(["mu1", "exponent", "case", "verdict"])
    for mu1 in np.linspace(1.05, 4.0, args.points):
        net = Network.from_edges([mu1, args.mu2], [1.0, 0.0], [(0, 1, 1.0)])
        res = decay_lower_bound(net, kern, 1, args.b)
        v = check_tightness(net, kern, 1, args.b, res)
        out.writerow([f"{mu1:.4f}", f"{res.exponent:.10g}", res.active_case, v.verdict])


if __name__ == "__main__":
    main()
