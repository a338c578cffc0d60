"""Numerical certificates for the three tightness conditions.

Every "for all s" condition is checked by scanning a scrambled Sobol sample of
the inner cone, a cloud of points close to the boundary ``s = t - t_i``, and a
Nelder-Mead polish of the worst points. Verdicts carry the achieved margins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import BOUNDARY, CASE1, CASE2, CASE3, NodeModel, node_model
from .optimize import DecayResult, OptimizerOptions, _nelder_mead, _sobol, _Space, decay_lower_bound, heuristic_scale

TIGHT1 = "TightThm1"
TIGHT2 = "TightThm2"
TIGHT3 = "TightThm3"
LOWER_ONLY = "LowerBoundOnly"


@dataclass(frozen=True)
class TightnessOptions:
    samples: int = 10_000
    near_boundary: int = 512
    polish: int = 5
    tol: float = 1e-7
    seed: int = 1


@dataclass
class TightnessVerdict:
    verdict: str
    route: Optional[str]
    margins: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "route": self.route, "margins": self.margins, "details": self.details}


def _u_samples(space: _Space, t: np.ndarray, opts: TightnessOptions) -> np.ndarray:
    d = len(space.up)
    base = _sobol(d, opts.samples, opts.seed)
    ub = space.u_boundary(t)
    rng = np.random.default_rng(opts.seed)
    eps = np.geomspace(1e-7, 1e-1, 16)
    dirs = rng.standard_normal((opts.near_boundary, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    near = ub[None, :] + eps[np.arange(opts.near_boundary) % eps.size][:, None] * dirs
    return np.vstack([base, np.clip(near, 0.0, 1.0)])


def _maximise(fun, space, t, opts) -> tuple[float, np.ndarray]:
    """Max of a batched function of u over [0,1]^d, with a local polish of the best points."""
    u = _u_samples(space, t, opts)
    vals = fun(u)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    order = np.argsort(-vals, kind="stable")
    best_val, best_u = float(vals[order[0]]), u[order[0]]
    d = u.shape[1]
    for idx in order[: opts.polish]:
        v0 = np.arcsin(np.sqrt(np.clip(u[idx], 0.0, 1.0)))

        def neg(v):
            out = fun(np.sin(v)[None, :] ** 2)[0]
            return -out if np.isfinite(out) else np.inf

        res = _nelder_mead(neg, v0, 0.05, 1e-12, 1e-14, 300 * d)
        if np.isfinite(res.fun) and -res.fun > best_val:
            best_val, best_u = float(-res.fun), np.sin(res.x) ** 2
    return best_val, best_u


def _functional(model: NodeModel, ends: np.ndarray, starts: np.ndarray):
    """Times and coefficients of sum_r Pi_r [A(ends_r) - A(starts_r)] on the doubled layout."""
    return np.concatenate([ends, starts]), np.concatenate([model.weight, -model.weight])


def case1_violation(model: NodeModel, space: _Space, b: float, t: np.ndarray, opts: TightnessOptions) -> tuple[float, np.ndarray]:
    """max over s != t - t_i of (k - c) / (rate * dist(s, t - t_i)); negative means the condition holds."""
    sb = model.boundary_s(t)
    fx_times, fx_coef = _functional(model, t, sb)
    v1 = float(model.var_x(t)[0])
    y0 = b - model.slack * t[model.root]
    rate = y0 / abs(t[model.root])
    cov_b = model.point_cov(sb[None, :], fx_times, fx_coef)[0]
    up = model.upstream

    def fun(u):
        s = space.s_of(t, u)
        cov_s = model.point_cov(s, fx_times, fx_coef)
        cxw = (cov_s - cov_b[None, :]) @ model.weight
        k = cxw / v1 * y0
        c = model.drift(t[None, :], s)
        dist = np.abs(s[:, up] - sb[None, up]) @ model.weight[up]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (k - c) / (rate * dist)
        return np.where(dist > 1e-12 * abs(t[model.root]), out, -np.inf)

    return _maximise(fun, space, t, opts)


def _fcov(model: NodeModel, fa, fb) -> float:
    """Covariance of two functionals given on the doubled layout."""
    ta, ca = fa
    P = model.P
    lo = model.point_cov(ta[None, :P], fb[0], fb[1])[0] @ ca[:P]
    hi = model.point_cov(ta[None, P:], fb[0], fb[1])[0] @ ca[P:]
    return float(lo + hi)


def _conditional_margin(model, space, b, t, s_star, cond_funcs, cond_vals, opts):
    """min over s of E[Abar(s, s*) | conditions] - (c(t, s*) - c(t, s)), scaled by y0."""
    times = [f[0] for f in cond_funcs]
    coefs = [f[1] for f in cond_funcs]
    n = len(cond_funcs)
    M = np.array([[_fcov(model, cond_funcs[a], cond_funcs[c_]) for c_ in range(n)] for a in range(n)])
    M = 0.5 * (M + M.T)
    theta = np.linalg.solve(M, np.asarray(cond_vals, dtype=float))
    cov_star = [model.point_cov(s_star[None, :], times[a], coefs[a])[0] for a in range(n)]
    c_star = float(model.drift(t[None, :], s_star[None, :])[0])
    y0 = b - model.slack * t[model.root]

    def fun(u):
        s = space.s_of(t, u)
        mean = np.zeros(s.shape[0])
        for a in range(n):
            cs = model.point_cov(s, times[a], coefs[a])
            mean += theta[a] * ((cov_star[a][None, :] - cs) @ model.weight)
        cs_ = model.drift(t[None, :], s)
        return -(mean - (c_star - cs_)) / y0

    worst, u = _maximise(fun, space, t, opts)
    return -worst, u


def check_tightness(
    net,
    kernel,
    i: int,
    b: float,
    result: DecayResult,
    opts: Optional[TightnessOptions] = None,
    optimizer_opts: Optional[OptimizerOptions] = None,
) -> TightnessVerdict:
    opts = opts or TightnessOptions()
    model = node_model(net, kernel, i)
    if len(model.upstream) == 0:
        return TightnessVerdict(TIGHT1, "vacuous", {}, {"reason": "no upstream paths; the inner cone is a single point"})
    space = _Space(model, heuristic_scale(model, b))
    t_star = model.as_array(result.optimizer_t)
    s_star = model.as_array(result.optimizer_s)
    case = result.active_case
    margins: dict = {}
    details: dict = {"active_case": case}

    if case in (CASE1, BOUNDARY):
        t_tilde = result.diagnostics.get("t_tilde")
        if t_tilde is None:
            t_tilde = decay_lower_bound(net, kernel, i, b, optimizer_opts).diagnostics["t_tilde"]
        t_tilde = np.asarray(t_tilde, dtype=float)
        v_suff, _ = case1_violation(model, space, b, t_tilde, opts)
        margins["sufficient_max_violation"] = v_suff
        if v_suff < -opts.tol:
            return TightnessVerdict(TIGHT1, "sufficient", margins, details)
        v_dir, _ = case1_violation(model, space, b, t_star, opts)
        margins["direct_max_violation"] = v_dir
        if v_dir < -opts.tol:
            return TightnessVerdict(TIGHT1, "direct", margins, details)
        return TightnessVerdict(LOWER_ONLY, None, margins, details)

    ev = model.evaluate(b, t_star[None, :], s_star[None, :])
    y0 = float(ev["y0"][0])
    c = float(ev["c"][0])
    z0 = float(ev["z0"][0])
    fx = _functional(model, t_star, model.boundary_s(t_star))
    fy = _functional(model, t_star, s_star)
    fw = _functional(model, s_star, model.boundary_s(t_star))

    if case == CASE2:
        margins["h_minus_c"] = (float(ev["h"][0]) - c) / y0
        cond, _ = _conditional_margin(model, space, b, t_star, s_star, [fy], [z0], opts)
        margins["conditional_min"] = cond
        ok = margins["h_minus_c"] > opts.tol and cond >= -opts.tol
        return TightnessVerdict(TIGHT2 if ok else LOWER_ONLY, "direct" if ok else None, margins, details)

    if case == CASE3:
        margins["c_minus_h"] = (c - float(ev["h"][0])) / y0
        margins["k_minus_c"] = (float(ev["k"][0]) - c) / y0
        cond, _ = _conditional_margin(model, space, b, t_star, s_star, [fx, fw], [y0, c], opts)
        margins["conditional_min"] = cond
        ok = margins["c_minus_h"] >= -opts.tol and margins["k_minus_c"] >= -opts.tol and cond >= -opts.tol
        return TightnessVerdict(TIGHT3 if ok else LOWER_ONLY, "direct" if ok else None, margins, details)

    return TightnessVerdict(LOWER_ONLY, None, margins, details)
