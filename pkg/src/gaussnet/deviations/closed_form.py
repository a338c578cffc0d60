"""Closed-form exponent for equal-Hurst, time-reversible, nonnegatively correlated inputs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from ..errors import HypothesisViolated, ValidationError
from ..network import aggregate_variance, enumerate_paths, path_weight
from .model import TimeVector, node_model

_H_EQ_TOL = 1e-12


@dataclass(frozen=True)
class ClosedFormResult:
    exponent: float
    condition_holds: bool
    condition_lhs: float
    condition_rhs: float
    sigma_bar2: float
    alpha_sup: float

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "condition_holds": self.condition_holds,
            "condition_lhs": self.condition_lhs,
            "condition_rhs": self.condition_rhs,
            "sigma_bar2": self.sigma_bar2,
            "alpha_sup": self.alpha_sup,
        }


def _require_hypotheses(kernel) -> float:
    h = kernel.hurst
    if np.max(h) - np.min(h) > _H_EQ_TOL:
        raise HypothesisViolated("all Hurst indices must be equal")
    H = float(h[0])
    if H < 0.5:
        raise HypothesisViolated(f"Hurst index {H} is below 1/2")
    if np.any(kernel.eta != 0):
        raise HypothesisViolated("inter-correlations eta must all be zero")
    if np.any(kernel.rho < 0):
        raise HypothesisViolated("correlations rho must be nonnegative")
    return H


def g_alpha(alpha, H: float):
    a = np.asarray(alpha, dtype=float)
    return a ** (2 * H) + 1.0 - (1.0 - a) ** (2 * H)


def sup_g_over_alpha(H: float) -> float:
    """sup over (0, 1) of g(a) / a, including the limits at both ends."""
    lim0 = 2.0 if abs(H - 0.5) < _H_EQ_TOL else 2 * H if H > 0.5 else math.inf
    grid = np.linspace(1e-6, 1.0, 2001)
    vals = g_alpha(grid, H) / grid
    j = int(np.argmax(vals))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    res = minimize_scalar(lambda a: -g_alpha(a, H) / a, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(max(lim0, vals[j], -res.fun))


def _path_coefficients(net, kernel, i: int):
    sig, rho = kernel.sigma, kernel.rho
    up = enumerate_paths(net, i, 2)
    pis = np.array([path_weight(net, r) for r in up])
    w = np.array(
        [sig[r[0]] * sig[i] * rho[r[0], i] + sum(sig[r[0]] * sig[q[0]] * rho[r[0], q[0]] * pq for q, pq in zip(up, pis)) for r in up]
    )
    return up, pis, w


def alpha_ratio_sup(w: np.ndarray, pis: np.ndarray, H: float, starts: int = 8, seed: int = 0) -> float:
    """sup over alpha in (0,1)^m of sum w Pi g(alpha) / sum alpha Pi.

    Multi-start L-BFGS-B in the interior plus the single-path limits, where all
    other coordinates tend to zero; the latter are exact whenever w >= 0.
    """
    m = w.shape[0]
    if m == 0:
        return 0.0
    single = sup_g_over_alpha(H)
    best = float(np.max(w)) * single if np.max(w) > 0 else -math.inf

    def neg(a):
        return -float(np.sum(w * pis * g_alpha(a, H)) / np.sum(a * pis))

    rng = np.random.default_rng(seed)
    for _ in range(starts):
        a0 = rng.uniform(0.05, 0.95, m)
        res = minimize(neg, a0, method="L-BFGS-B", bounds=[(1e-9, 1.0)] * m)
        best = max(best, -float(res.fun))
    return best


def closed_form_fbm(net, kernel, i: int, b: float) -> ClosedFormResult:
    if not b > 0:
        raise ValidationError("b must be positive")
    H = _require_hypotheses(kernel)
    model = node_model(net, kernel, i)
    sb2 = aggregate_variance(net, kernel.sigma, kernel.rho, i)
    slack = model.slack
    exponent = (1.0 / (2.0 * sb2)) * (b / (1.0 - H)) ** (2.0 - 2.0 * H) * (slack / H) ** (2.0 * H)
    up, pis, w = _path_coefficients(net, kernel, i)
    if not up:
        return ClosedFormResult(float(exponent), True, math.inf, 0.0, float(sb2), 0.0)
    inflow = np.array([net.inflow_capacity(j) for j in range(net.k)])
    upstream = sorted({r[0] for r in up})
    lhs = float(min(net.mu[j] - net.lam[j] - inflow[j] for j in upstream))
    sup = alpha_ratio_sup(w, pis, H)
    rhs = float(sup * slack / (2.0 * H * sb2))
    return ClosedFormResult(float(exponent), bool(lhs > rhs), lhs, rhs, float(sb2), float(sup))


def optimal_t_structure(net, kernel, i: int, b: float) -> TimeVector:
    if not b > 0:
        raise ValidationError("b must be positive")
    H = _require_hypotheses(kernel)
    model = node_model(net, kernel, i)
    ti = -(b / model.slack) * (H / (1.0 - H))
    return model.vector(np.full(model.P, ti))
