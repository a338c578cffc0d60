"""Fitted Monte Carlo exponent next to the numerical lower bound for a network file."""

import argparse
import json

from gaussnet.deviations import decay_lower_bound
from gaussnet.io import load_network
from gaussnet.montecarlo import SimConfig, estimate_overflow


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("network")
    ap.add_argument("--node", required=True)
    ap.add_argument("--b", type=float, default=1.0)
    ap.add_argument("--scales", default="1,2,3")
    ap.add_argument("--reps", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    nd = load_network(args.network)
    i = nd.index(args.node)
    res = decay_lower_bound(nd.net, nd.kernel, i, args.b)
    cfg = SimConfig(scales=tuple(int(x) for x in args.scales.split(",")), b=args.b,
                    replications=args.reps, seed=args.seed)
    est = estimate_overflow(nd.net, nd.kernel, i, cfg)
    print(json.dumps({
        "node": args.node,
        "lower_bound": res.exponent,
        "active_case": res.active_case,
        "monte_carlo": est.exponent,
        "per_scale": [{"n": s.n, "p": s.p_hat, "ci": [s.ci_lo, s.ci_hi]} for s in est.per_scale],
    }, indent=2))


if __name__ == "__main__":
    main()
