"""Most probable overflow paths by Gaussian conditioning."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateVariance, UnsupportedCase, ValidationError
from .model import BOUNDARY, CASE1, CASE3, node_model
from .optimize import DecayResult


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not (np.isfinite(self.start) and np.isfinite(self.stop) and np.isfinite(self.step)):
            raise ValidationError("grid bounds must be finite")
        if self.step <= 0 or self.stop < self.start:
            raise ValidationError("grid needs step > 0 and stop >= start")

    def times(self) -> np.ndarray:
        n = int(np.floor((self.stop - self.start) / self.step + 1e-9))
        # count back from stop so that stop itself is always a grid point
        return self.stop - self.step * np.arange(n, -1, -1)


@dataclass(frozen=True)
class MeanPath:
    grid: Grid
    times: np.ndarray
    values: np.ndarray  # (k, len(times))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time"] + [f"f_{j}" for j in range(self.values.shape[0])])
        for a, tau in enumerate(self.times):
            w.writerow([repr(float(tau))] + [repr(float(v)) for v in self.values[:, a]])
        return buf.getvalue()


def _cov_nodes(model, taus: np.ndarray, ftimes: np.ndarray, fcoefs: np.ndarray) -> np.ndarray:
    """Cov(A_j(tau), F) for every node j and grid time tau, F on the doubled layout."""
    kern = model.kernel
    nodes = np.tile(model.src, 2)
    k = kern.k
    out = np.empty((k, taus.shape[0]))
    for j in range(k):
        c = kern.cov(np.full((taus.shape[0], nodes.shape[0]), j), nodes[None, :], taus[:, None], ftimes[None, :])
        out[j] = c @ fcoefs
    return out


def most_probable_path(net, kernel, i: int, b: float, result: DecayResult, grid: Grid) -> MeanPath:
    model = node_model(net, kernel, i)
    t = model.as_array(result.optimizer_t)
    s = model.as_array(result.optimizer_s)
    taus = grid.times()
    w = model.weight
    sb = model.boundary_s(t)
    fx = (np.concatenate([t, sb]), np.concatenate([w, -w]))
    ev = model.evaluate(b, t[None, :], s[None, :])
    y0 = float(ev["y0"][0])
    v1 = float(ev["V1"][0])
    case = result.active_case
    if case in (CASE1, BOUNDARY):
        if not v1 > 0:
            raise DegenerateVariance("Var(Abar_i(t - t_i, t)) is not positive")
        vals = _cov_nodes(model, taus, *fx) * (y0 / v1)
    elif case == CASE3:
        fw = (np.concatenate([s, sb]), np.concatenate([w, -w]))
        M = np.array([[v1, ev["CXW"][0]], [ev["CXW"][0], ev["VW"][0]]])
        theta = np.linalg.solve(M, np.array([y0, float(ev["c"][0])]))
        vals = theta[0] * _cov_nodes(model, taus, *fx) + theta[1] * _cov_nodes(model, taus, *fw)
    else:
        raise UnsupportedCase(f"no most probable path is emitted for {case}")
    return MeanPath(grid, taus, vals)
