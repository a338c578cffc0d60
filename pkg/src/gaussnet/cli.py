"""Command-line front end.

Exit status 0 on success, 1 on invalid input, 2 on numerical failure. Results go
to ``--out`` or standard output; diagnostics and error reports go to standard error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .deviations import (
    Grid,
    OptimizerOptions,
    TightnessOptions,
    check_tightness,
    closed_form_fbm,
    decay_lower_bound,
    most_probable_path,
    optimal_t_structure,
)
from .errors import GaussNetError, ValidationError
from .montecarlo import SimConfig, SimGrid, estimate_overflow, input_formula_sides, sample_gaussian_paths
from .network import require_stable

log = logging.getLogger("gaussnet")


class UsageError(ValidationError):
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v

    return conv


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _scales(text):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"scales must be comma-separated integers: {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("scales must be positive integers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gaussnet", description="Overflow exponents for acyclic Gaussian queueing networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, need_b=True):
        sp.add_argument("network", type=Path, help="network JSON file")
        sp.add_argument("--node", required=True, help="target node id as written in the network file")
        if need_b:
            sp.add_argument("--b", type=_positive(float), required=True, help="overflow threshold per source")
        sp.add_argument("--out", type=Path, help="output file (default: standard output)")
        sp.add_argument("--seed", type=_seed, default=0)
        sp.add_argument("--threads", type=_positive(int), default=1, help="accepted for compatibility; work runs in one thread")
        sp.add_argument("-v", "--verbose", action="store_true")

    def optim(sp):
        sp.add_argument("--starts", type=_positive(int), default=16, help="optimizer multi-starts")
        sp.add_argument("--tol", type=_positive(float), default=None, help="certification / tightness tolerance")

    sp = sub.add_parser("rate", help="decay-rate lower bound and optimizer")
    common(sp)
    optim(sp)
    sp = sub.add_parser("check", help="tightness verdict with margins")
    common(sp)
    optim(sp)
    sp.add_argument("--samples", type=_positive(int), default=10_000)
    sp = sub.add_parser("closed-form", help="closed-form exponent for equal-Hurst reversible inputs")
    common(sp)
    sp = sub.add_parser("path", help="most probable path as CSV")
    common(sp)
    optim(sp)
    sp.add_argument("--start", type=float, help="grid start (default: three times the earliest optimizer time)")
    sp.add_argument("--step", type=_positive(float), help="grid step (default: |start| / 300)")
    sp = sub.add_parser("simulate", help="Monte Carlo overflow probabilities and fitted exponent")
    common(sp)
    sp.add_argument("--scales", type=_scales, default=[1, 2, 3])
    sp.add_argument("--dt", type=_positive(float))
    sp.add_argument("--horizon", type=_positive(float))
    sp.add_argument("--burn-in", type=_positive(float))
    sp.add_argument("--reps", type=_positive(int), default=1000)
    sp.add_argument("--csv", type=Path, help="per-scale CSV file")
    sp = sub.add_parser("verify-lemma", help="check the input-process identity on simulated paths")
    common(sp, need_b=False)
    sp.add_argument("--n", type=_positive(int), default=1)
    sp.add_argument("--realizations", type=_positive(int), default=100)
    sp.add_argument("--grid-start", type=float, default=-5.0)
    sp.add_argument("--dt", type=_positive(float), default=0.1)
    sp.add_argument("--method", choices=["dp", "enumerate"], default="dp")
    sp.add_argument("--rtol", type=_positive(float), default=1e-6)
    return p


def _opt(args) -> OptimizerOptions:
    kw = {"starts": args.starts, "seed": args.seed}
    if args.tol is not None:
        kw["certify_tol"] = args.tol
    return OptimizerOptions(**kw)


def _relabel(doc, ids):
    doc["node"] = ids[doc["node"]]
    if "paths" in doc:
        doc["paths"] = [[ids[j] for j in r] for r in doc["paths"]]
    return doc


def _emit(text: str, out: Optional[Path]):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _json(doc: dict, out: Optional[Path]):
    doc = io.jsonable({"schema": io.SCHEMA_VERSION, **doc})
    io.validate_output(doc)
    _emit(io.dumps(doc), out)


def cmd_rate(args, nd, i):
    res = decay_lower_bound(nd.net, nd.kernel, i, args.b, _opt(args))
    _json({"command": "rate", **_relabel(res.to_dict(), nd.ids)}, args.out)


def cmd_check(args, nd, i):
    opts = _opt(args)
    res = decay_lower_bound(nd.net, nd.kernel, i, args.b, opts)
    topts = TightnessOptions(samples=args.samples, seed=args.seed + 1, **({"tol": args.tol} if args.tol else {}))
    v = check_tightness(nd.net, nd.kernel, i, args.b, res, topts, opts)
    doc = {
        "command": "check",
        "node": nd.ids[i],
        "b": args.b,
        "exponent": res.exponent,
        "active_case": res.active_case,
        "verdict": v.verdict,
        "route": v.route,
        "margins": v.margins,
        "details": v.details,
    }
    _json(doc, args.out)


def cmd_closed_form(args, nd, i):
    cf = closed_form_fbm(nd.net, nd.kernel, i, args.b)
    t = optimal_t_structure(nd.net, nd.kernel, i, args.b)
    doc = {"command": "closed-form", "node": nd.ids[i], "b": args.b, **cf.to_dict()}
    doc["paths"] = [[nd.ids[j] for j in r] for r in t.paths]
    doc["optimal_t"] = t.values
    _json(doc, args.out)


def cmd_path(args, nd, i):
    res = decay_lower_bound(nd.net, nd.kernel, i, args.b, _opt(args))
    earliest = float(np.min(res.optimizer_t.values))
    start = args.start if args.start is not None else 3.0 * earliest
    if not start < 0:
        raise ValidationError("grid start must be negative")
    step = args.step if args.step is not None else abs(start) / 300.0
    start = -step * np.ceil(abs(start) / step - 1e-9)
    mp = most_probable_path(nd.net, nd.kernel, i, args.b, res, Grid(start, 0.0, step))
    header, _, body = mp.to_csv().partition("\n")
    header = ",".join(["time"] + [f"f_{x}" for x in nd.ids])
    _emit(header + "\n" + body, args.out)


def cmd_simulate(args, nd, i):
    cfg = SimConfig(
        scales=tuple(args.scales),
        b=args.b,
        dt=args.dt,
        horizon=args.horizon,
        burn_in=args.burn_in,
        replications=args.reps,
        seed=args.seed,
    )
    est = estimate_overflow(nd.net, nd.kernel, i, cfg)
    doc = est.to_dict()
    doc["node"] = nd.ids[i]
    _json({"command": "simulate", **doc}, args.out)
    if args.csv is not None:
        args.csv.write_text(est.to_csv())


def cmd_verify_lemma(args, nd, i):
    grid = SimGrid(args.grid_start, 0.0, args.dt)
    if grid.zero_index() is None:
        raise ValidationError("the grid start must be a whole number of steps before 0")
    require_stable(nd.net)
    checks = []
    for r in range(args.realizations):
        paths = sample_gaussian_paths(nd.net, nd.kernel, grid, args.n, np.random.SeedSequence([args.seed, r]))
        idx = list(range(grid.zero_index()))
        lhs, rhs = input_formula_sides(nd.net, paths, args.n, grid, i, idx, args.method)
        for m, a, b in zip(idx, lhs, rhs):
            scale = max(abs(a), abs(b))
            rel = abs(a - b) / scale if scale > 0 else 0.0
            checks.append({"realization": r, "time": float(paths.times[m]), "lhs": a, "rhs": b, "relative_error": rel})
    worst = max(c["relative_error"] for c in checks)
    doc = {
        "command": "verify-lemma",
        "node": nd.ids[i],
        "n": args.n,
        "method": args.method,
        "grid": {"start": grid.start, "stop": grid.stop, "step": grid.step},
        "max_relative_error": worst,
        "passed": bool(worst <= args.rtol),
        "checks": checks,
    }
    _json(doc, args.out)


COMMANDS = {
    "rate": cmd_rate,
    "check": cmd_check,
    "closed-form": cmd_closed_form,
    "path": cmd_path,
    "simulate": cmd_simulate,
    "verify-lemma": cmd_verify_lemma,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            log.setLevel(logging.INFO)
        nd = io.load_network(args.network)
        i = nd.index(args.node)
        log.info("node %s -> index %d", args.node, i)
        COMMANDS[args.command](args, nd, i)
    except GaussNetError as exc:
        sys.stderr.write(io.dumps({"schema": io.SCHEMA_VERSION, "command": "error", **exc.payload()}))
        return exc.exit_status
    return 0


if __name__ == "__main__":
    sys.exit(main())
