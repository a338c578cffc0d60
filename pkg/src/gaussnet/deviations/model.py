"""Per-node evaluator for c, k, h and the piecewise rate function.

Everything here works on batches: time vectors are arrays of shape ``(B, P)``
whose columns follow ``NodeModel.paths``. Three functionals recur:

* ``X = Abar(t - t_i, t)``, the single-constraint functional;
* ``Y = Abar(s, t)``;
* ``W = Abar(t - t_i, s) = X - Y``, which vanishes at the boundary ``s = t - t_i``.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from ..errors import DegenerateVariance, DomainViolation, SingularCovariance, ValidationError
from ..kernel import MfBmKernel, _w
from ..network import Network, Path, enumerate_paths, path_weight, require_stable

BOUNDARY_REL_VAR = 1e-12
DOMAIN_TOL = 1e-12

CASE1 = "Case1"
CASE2 = "Case2"
CASE3 = "Case3"
BOUNDARY = "Boundary"
_CASE_NAMES = (BOUNDARY, CASE1, CASE2, CASE3)


@dataclass(frozen=True, eq=False)
class TimeVector:
    """Times indexed by the paths ending at a fixed node."""

    paths: tuple[Path, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != (len(self.paths),):
            raise ValidationError("time vector length must match the number of paths")
        v.setflags(write=False)
        object.__setattr__(self, "paths", tuple(tuple(int(x) for x in r) for r in self.paths))
        object.__setattr__(self, "values", v)

    def __getitem__(self, r) -> float:
        return float(self.values[self.paths.index(tuple(r))])

    def as_dict(self) -> dict[Path, float]:
        return {r: float(v) for r, v in zip(self.paths, self.values)}


TimeLike = Union[TimeVector, Mapping, Sequence[float], np.ndarray]


class NodeModel:
    """Path structure, drift coefficients and kernel parameters for one target node."""

    def __init__(self, net: Network, kernel: MfBmKernel, i: int):
        if kernel.k != net.k:
            raise ValidationError("kernel and network have different node counts")
        report = require_stable(net)
        self.net = net
        self.kernel = kernel
        self.i = int(i)
        self.paths: tuple[Path, ...] = tuple(enumerate_paths(net, i, 1))
        P = len(self.paths)
        self.P = P
        self.root = self.paths.index((self.i,))
        index = {r: a for a, r in enumerate(self.paths)}
        self.parent = np.array([-1 if len(r) == 1 else index[r[1:]] for r in self.paths], dtype=int)
        # parents before children
        self.order = np.array(sorted(range(P), key=lambda a: len(self.paths[a])), dtype=int)
        self.upstream = np.array([a for a in self.order if a != self.root], dtype=int)
        self.src = np.array([r[0] for r in self.paths], dtype=int)
        self.weight = np.array([path_weight(net, r) for r in self.paths])
        lbar = report.effective_rates
        self.lbar = float(lbar[self.i])
        self.slack = float(net.mu[self.i] - self.lbar)
        inflow = np.array([net.inflow_capacity(j) for j in range(net.k)])
        a = net.mu - net.lam - inflow
        self.acoef = a[self.src].astype(float)
        self.acoef[self.root] = self.lbar - net.lam[self.i] - inflow[self.i]
        # kernel parameters on the (m_row x P) by (m_col x P) point layouts
        ii, jj = self.src[:, None], self.src[None, :]
        base = (kernel._hs[ii, jj], kernel.rho[ii, jj], kernel.eta[ii, jj], kernel._one[ii, jj], 0.5 * kernel._ss[ii, jj])
        self._params = {
            (a, b): tuple(np.tile(x, (a, b)) for x in base) for a in (1, 2, 3) for b in (1, 2, 3)
        }
        # rows X, Y, W; columns t, t - t_i (coef_t) and s (coef_s)
        w, z = self.weight, np.zeros(P)
        self._coef_t = np.array([np.concatenate([w, -w]), np.concatenate([w, z]), np.concatenate([z, -w])])
        self._coef_s = np.array([z, -w, w])

    # ------------------------------------------------------------------ vectors
    def as_array(self, x: TimeLike) -> np.ndarray:
        if isinstance(x, TimeVector):
            if x.paths != self.paths:
                if set(x.paths) != set(self.paths):
                    raise ValidationError("time vector paths do not match the target node")
                return np.array([x[r] for r in self.paths])
            return np.array(x.values)
        if isinstance(x, Mapping):
            try:
                return np.array([float(x[r]) for r in self.paths])
            except KeyError as exc:
                raise ValidationError(f"time vector is missing path {exc.args[0]}") from None
        arr = np.asarray(x, dtype=float)
        if arr.shape[-1] != self.P:
            raise ValidationError(f"time vector must have {self.P} entries, got {arr.shape[-1]}")
        return arr

    def vector(self, x) -> TimeVector:
        return TimeVector(self.paths, self.as_array(x))

    def boundary_s(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return t - t[..., self.root : self.root + 1]

    def check_domain(self, t: np.ndarray, s: np.ndarray | None = None):
        t = np.asarray(t, dtype=float)
        scale = DOMAIN_TOL * max(1.0, float(np.max(np.abs(t))))
        if not np.all(np.isfinite(t)):
            raise DomainViolation("time vector has non-finite entries")
        if t[self.root] >= 0:
            raise DomainViolation("t_i must be negative")
        for a in self.upstream:
            if t[a] > t[self.parent[a]] + scale:
                raise DomainViolation(f"t for path {self.paths[a]} exceeds its successor")
        if s is None:
            return
        s = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(s)):
            raise DomainViolation("s has non-finite entries")
        if abs(s[self.root]) > scale:
            raise DomainViolation("s_i must be 0")
        for a in self.upstream:
            if s[a] < t[a] - scale or s[a] > s[self.parent[a]] + scale:
                raise DomainViolation(f"s for path {self.paths[a]} leaves [t_r, s_r+]")

    # ------------------------------------------------------------- covariances
    def _gram(self, rows: np.ndarray, cols: np.ndarray | None = None) -> np.ndarray:
        """Reduced Gram: only valid inside bilinear forms whose coefficients cancel per path.

        Each functional carries +Pi_r and -Pi_r on the same source, so the terms of the
        covariance that depend on one argument only drop out after contraction.
        """
        cols = rows if cols is None else cols
        hs, rho, eta, one, half = self._params[(rows.shape[-1] // self.P, cols.shape[-1] // self.P)]
        return -half * _w(rows[..., :, None] - cols[..., None, :], hs, rho, eta, one)

    def var_x(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(t)
        pts = np.concatenate([t, self.boundary_s(t)], axis=-1)
        c = np.concatenate([self.weight, -self.weight])
        g = self._gram(pts)
        return np.einsum("i,bij,j->b", c, g, c)

    def moments(self, t: np.ndarray, s: np.ndarray) -> dict:
        """Second moments of (X, Y, W) for batches of (t, s).

        Points are laid out as [t, t - t_i, s]. When a large batch shares one t, the
        t-only block of the Gram is computed once.
        """
        t = np.atleast_2d(t)
        s = np.atleast_2d(s)
        t, s = np.broadcast_arrays(t, s)
        tb = np.concatenate([t, self.boundary_s(t)], axis=-1)
        ct, cs = self._coef_t, self._coef_s
        if t.shape[0] > 8 and np.all(t == t[0]):
            g_tt = self._gram(tb[:1])
            cross = ct @ self._gram(tb, s) @ cs.T
            m = ct @ g_tt @ ct.T + cross + np.swapaxes(cross, -1, -2) + cs @ self._gram(s) @ cs.T
        else:
            c = np.concatenate([ct, cs], axis=1)
            m = c @ self._gram(np.concatenate([tb, s], axis=-1)) @ c.T
        return {
            "V1": m[:, 0, 0],
            "VY": m[:, 1, 1],
            "VW": m[:, 2, 2],
            "CXY": m[:, 0, 1],
            "CXW": m[:, 0, 2],
            "CYW": m[:, 1, 2],
        }

    def point_cov(self, nodes_t: np.ndarray, func_times: np.ndarray, func_coefs: np.ndarray) -> np.ndarray:
        """Cov(A_{src_r}(times[b, r]), F) for a fixed functional F on the doubled/tripled layout.

        ``nodes_t`` has shape (B, P); ``func_times`` and ``func_coefs`` have length m*P.
        """
        m = func_times.shape[0] // self.P
        nodes = np.tile(self.src, m)
        kern = self.kernel
        ii, jj = self.src[:, None], nodes[None, :]
        hs, rho, eta, one = kern._hs[ii, jj], kern.rho[ii, jj], kern.eta[ii, jj], kern._one[ii, jj]
        half = 0.5 * kern._ss[ii, jj]
        a = nodes_t[..., :, None]
        b = func_times[None, None, :]
        g = half * (_w(a, hs, rho, eta, one) + _w(-b, hs, rho, eta, one) - _w(a - b, hs, rho, eta, one))
        return g @ func_coefs

    # --------------------------------------------------------- rate function
    def drift(self, t: np.ndarray, s: np.ndarray) -> np.ndarray:
        """c_i(t, s); uses s_i = 0 for the root entry."""
        t = np.atleast_2d(t)
        s = np.atleast_2d(s)
        return (t - s) @ (self.acoef * self.weight)

    def evaluate(self, b: float, t, s, boundary: np.ndarray | None = None) -> dict:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        s = np.atleast_2d(np.asarray(s, dtype=float))
        t, s = np.broadcast_arrays(t, s)
        mom = self.moments(t, s)
        V1, VW, VY, CXW, CYW = mom["V1"], mom["VW"], mom["VY"], mom["CXW"], mom["CYW"]
        if np.any(~(V1 > 0)):
            raise DegenerateVariance("Var(Abar_i(t - t_i, t)) is not positive")
        y0 = b - self.slack * t[:, self.root]
        c = self.drift(t, s)
        z0 = y0 - c
        k = CXW / V1 * y0
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(VY > 0, CYW / VY * z0, -np.inf)
        condvar = VW - CXW**2 / V1
        exact = np.all(s == self.boundary_s(t), axis=-1)
        if boundary is not None:
            exact = exact | boundary
        # on s = t - t_i the functional W vanishes identically, so c = k = h = 0 exactly
        c = np.where(exact, 0.0, c)
        z0 = np.where(exact, y0, z0)
        k = np.where(exact, 0.0, k)
        h = np.where(exact, 0.0, h)
        degen = condvar <= BOUNDARY_REL_VAR * V1
        bnd = exact | degen
        cond1 = bnd | (k < c)
        cond2 = h > c
        v1 = y0**2 / (2 * V1)
        with np.errstate(divide="ignore", invalid="ignore"):
            v2 = z0**2 / (2 * VY)
            v3 = v1 + (k - c) ** 2 / (2 * np.where(degen, 1.0, condvar))
        case = np.where(bnd, 0, np.where(cond1, 1, np.where(cond2, 2, 3)))
        value = np.where(case <= 1, v1, np.where(case == 2, v2, v3))
        return dict(mom, y0=y0, c=c, z0=z0, k=k, h=h, condvar=condvar, case=case, value=value,
                    case1_value=v1, cond1=cond1, cond2=cond2, boundary=bnd)

    def case1_objective(self, b: float, t: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(t)
        y0 = b - self.slack * t[:, self.root]
        return y0**2 / (2 * self.var_x(t))


_MODELS: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def node_model(net: Network, kernel: MfBmKernel, i: int) -> NodeModel:
    """Cached NodeModel; networks and kernels are immutable so identity is a safe key."""
    per_net = _MODELS.setdefault(net, weakref.WeakKeyDictionary())
    per_kernel = per_net.setdefault(kernel, {})
    if i not in per_kernel:
        per_kernel[i] = NodeModel(net, kernel, i)
    return per_kernel[i]


def case_name(code: int) -> str:
    return _CASE_NAMES[int(code)]


def _prepare(net, kernel, i, t, s=None, b=None):
    if b is not None and not b > 0:
        raise ValidationError("b must be positive")
    m = node_model(net, kernel, i)
    tt = m.as_array(t)
    ss = None if s is None else m.as_array(s)
    m.check_domain(tt, ss)
    return m, tt, ss


def c_fun(net, kernel, i, t: TimeLike, s: TimeLike) -> float:
    m, tt, ss = _prepare(net, kernel, i, t, s)
    return float(m.drift(tt, ss)[0])


def k_fun(net, kernel, i, b: float, t: TimeLike, s: TimeLike) -> float:
    m, tt, ss = _prepare(net, kernel, i, t, s, b)
    mom = m.moments(tt, ss)
    if not mom["V1"][0] > 0:
        raise DegenerateVariance("Var(Abar_i(t - t_i, t)) is not positive")
    return float(mom["CXW"][0] / mom["V1"][0] * (b - m.slack * tt[m.root]))


def h_fun(net, kernel, i, b: float, t: TimeLike, s: TimeLike) -> float:
    m, tt, ss = _prepare(net, kernel, i, t, s, b)
    mom = m.moments(tt, ss)
    if not mom["VY"][0] > 0:
        raise DegenerateVariance("Var(Abar_i(s, t)) is not positive")
    z0 = b - m.slack * tt[m.root] - m.drift(tt, ss)[0]
    return float(mom["CYW"][0] / mom["VY"][0] * z0)


def rate_case_value(net, kernel, i, b: float, t: TimeLike, s: TimeLike) -> tuple[float, str]:
    m, tt, ss = _prepare(net, kernel, i, t, s, b)
    ev = m.evaluate(b, tt, ss)
    return float(ev["value"][0]), case_name(ev["case"][0])


def case_flags(net, kernel, i, b: float, t: TimeLike, s: TimeLike) -> tuple[bool, bool]:
    """(first-case condition, second-case condition) as evaluated separately."""
    m, tt, ss = _prepare(net, kernel, i, t, s, b)
    ev = m.evaluate(b, tt, ss)
    return bool(ev["cond1"][0]), bool(ev["cond2"][0])


@dataclass(frozen=True)
class QPSolution:
    value: float
    y: float
    z: float
    active: str  # "y", "z", "both" or "none"


def solve_two_constraint_qp(C, y0: float, z0: float) -> QPSolution:
    """min 1/2 v' C^{-1} v subject to v >= (y0, z0), by enumerating active sets."""
    C = np.asarray(C, dtype=float)
    v1, v2, c12 = C[0, 0], C[1, 1], C[0, 1]
    det = v1 * v2 - c12**2
    if not (v1 > 0 and v2 > 0) or det <= 1e-14 * v1 * v2:
        raise SingularCovariance(f"covariance {C.tolist()} is singular")
    inv = np.array([[v2, -c12], [-c12, v1]]) / det

    def q(y, z):
        v = np.array([y, z])
        return 0.5 * float(v @ inv @ v)

    cands = []
    if 0.0 >= y0 and 0.0 >= z0:
        cands.append(QPSolution(0.0, 0.0, 0.0, "none"))
    z = c12 / v1 * y0
    if z >= z0:
        cands.append(QPSolution(q(y0, z), y0, z, "y"))
    y = c12 / v2 * z0
    if y >= y0:
        cands.append(QPSolution(q(y, z0), y, z0, "z"))
    cands.append(QPSolution(q(y0, z0), y0, z0, "both"))
    return min(cands, key=lambda c: c.value)


def qp_oracle(net, kernel, i, b: float, t: TimeLike, s: TimeLike, detail: bool = False):
    m, tt, ss = _prepare(net, kernel, i, t, s, b)
    mom = m.moments(tt, ss)
    C = np.array([[mom["V1"][0], mom["CXY"][0]], [mom["CXY"][0], mom["VY"][0]]])
    y0 = b - m.slack * tt[m.root]
    z0 = y0 - m.drift(tt, ss)[0]
    sol = solve_two_constraint_qp(C, y0, z0)
    return sol if detail else sol.value
