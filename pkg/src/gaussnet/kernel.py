"""Multivariate fractional Brownian motion covariance and weighted increment functionals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NotPSD, ValidationError

PSD_FLOOR = 1e-9
_H_ONE_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def _abs_pow(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    pos = ax > 0
    return np.where(pos, np.exp(p * np.log(np.where(pos, ax, 1.0))), 0.0)


def _w(x: np.ndarray, hs: np.ndarray, rho: np.ndarray, eta: np.ndarray, one: np.ndarray) -> np.ndarray:
    """Generating function with cov = s_i s_j / 2 [w(t) + w(-s) - w(t - s)]."""
    power = (rho + eta * np.sign(x)) * _abs_pow(x, hs)
    if not np.any(one):
        return power
    ax = np.abs(x)
    xlogx = np.where(ax > 0, x * np.log(np.where(ax > 0, ax, 1.0)), 0.0)
    return np.where(one, rho * ax - eta * xlogx, power)


@dataclass(frozen=True, eq=False)
class MfBmKernel:
    hurst: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    eta: np.ndarray | None = None

    def __post_init__(self):
        h = _frozen(self.hurst)
        sig = _frozen(self.sigma)
        k = h.shape[0]
        rho = _frozen(self.rho)
        eta = _frozen(np.zeros((k, k)) if self.eta is None else self.eta)
        if h.ndim != 1 or sig.shape != (k,) or rho.shape != (k, k) or eta.shape != (k, k):
            raise ValidationError("hurst, sigma, rho, eta must have shapes (k,), (k,), (k, k), (k, k)")
        for name, arr in (("hurst", h), ("sigma", sig), ("rho", rho), ("eta", eta)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} must be finite")
        if np.any(h <= 0) or np.any(h >= 1):
            raise ValidationError("Hurst indices must lie in (0, 1)")
        if np.any(sig <= 0):
            raise ValidationError("volatilities must be positive")
        if not np.allclose(rho, rho.T, atol=1e-12, rtol=0):
            raise ValidationError("rho must be symmetric")
        if not np.allclose(np.diag(rho), 1.0, atol=1e-12, rtol=0):
            raise ValidationError("rho must have unit diagonal")
        if np.any(np.abs(rho) > 1 + 1e-12):
            raise ValidationError("rho entries must lie in [-1, 1]")
        if not np.allclose(eta, -eta.T, atol=1e-12, rtol=0):
            raise ValidationError("eta must be antisymmetric")
        object.__setattr__(self, "hurst", h)
        object.__setattr__(self, "sigma", sig)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "eta", eta)
        hs = h[:, None] + h[None, :]
        object.__setattr__(self, "_hs", _frozen(hs))
        object.__setattr__(self, "_one", np.abs(hs - 1.0) < _H_ONE_TOL)
        object.__setattr__(self, "_ss", _frozen(sig[:, None] * sig[None, :]))

    @property
    def k(self) -> int:
        return self.hurst.shape[0]

    def scaled(self, c: float) -> "MfBmKernel":
        return MfBmKernel(self.hurst, c * self.sigma, self.rho, self.eta)

    def cov(self, i, j, t, s):
        """Cov(A_i(t), A_j(s)) for the standardized process; broadcasts over all arguments."""
        i = np.asarray(i, dtype=int)
        j = np.asarray(j, dtype=int)
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        hs = self._hs[i, j]
        rho = self.rho[i, j]
        eta = self.eta[i, j]
        one = self._one[i, j]
        val = 0.5 * self._ss[i, j] * (
            _w(t, hs, rho, eta, one) + _w(-s, hs, rho, eta, one) - _w(t - s, hs, rho, eta, one)
        )
        return val if val.ndim else float(val)


@dataclass(frozen=True, eq=False)
class Functional:
    """Linear combination sum_m coef_m * A_{node_m}(time_m) of point evaluations."""

    nodes: np.ndarray
    times: np.ndarray
    coefs: np.ndarray

    def cov(self, kernel: MfBmKernel, other: "Functional") -> float:
        c = kernel.cov(self.nodes[:, None], other.nodes[None, :], self.times[:, None], other.times[None, :])
        return float(self.coefs @ c @ other.coefs)


@dataclass(frozen=True, eq=False)
class IncrementSpec:
    """Weighted increments sum_r w_r [A_{node_r}(end_r) - A_{node_r}(start_r)]."""

    nodes: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=int, copy=True)
        st = np.array(self.starts, dtype=float, copy=True)
        en = np.array(self.ends, dtype=float, copy=True)
        w = np.array(self.weights, dtype=float, copy=True)
        m = nodes.shape[0]
        if nodes.ndim != 1 or st.shape != (m,) or en.shape != (m,) or w.shape != (m,):
            raise ValidationError("increment spec arrays must be 1-D with equal length")
        if not (np.all(np.isfinite(st)) and np.all(np.isfinite(en)) and np.all(np.isfinite(w))):
            raise ValidationError("increment times and weights must be finite")
        for name, arr in (("nodes", nodes), ("starts", st), ("ends", en), ("weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def for_paths(cls, net, paths: Sequence[tuple[int, ...]], starts, ends) -> "IncrementSpec":
        from .network import path_weight

        return cls(
            [r[0] for r in paths],
            starts,
            ends,
            [path_weight(net, r) for r in paths],
        )

    def functional(self) -> Functional:
        return Functional(
            np.concatenate([self.nodes, self.nodes]),
            np.concatenate([self.ends, self.starts]),
            np.concatenate([self.weights, -self.weights]),
        )


def _check_nodes(net, spec: IncrementSpec):
    if spec.nodes.size and (spec.nodes.min() < 0 or spec.nodes.max() >= net.k):
        raise ValidationError("increment spec references nodes outside the network")


def cov_barA(net, kernel: MfBmKernel, spec_a: IncrementSpec, spec_b: IncrementSpec) -> float:
    _check_nodes(net, spec_a)
    _check_nodes(net, spec_b)
    return spec_a.functional().cov(kernel, spec_b.functional())


def check_psd(mat: np.ndarray, floor: float = PSD_FLOOR) -> np.ndarray:
    """Eigenvalues of a symmetric matrix; raises NotPSD below ``-floor * max(1, max|diag|)``."""
    eig = np.linalg.eigvalsh(mat)
    scale = max(1.0, float(np.max(np.abs(np.diag(mat))))) if mat.size else 1.0
    if eig.size and eig[0] < -floor * scale:
        raise NotPSD(float(eig[0]), -floor * scale)
    return eig


def functional_gram(kernel: MfBmKernel, funcs: Sequence[Functional]) -> np.ndarray:
    nodes = np.concatenate([f.nodes for f in funcs])
    times = np.concatenate([f.times for f in funcs])
    k = kernel.cov(nodes[:, None], nodes[None, :], times[:, None], times[None, :])
    coef = np.zeros((len(funcs), nodes.shape[0]))
    pos = 0
    for a, f in enumerate(funcs):
        coef[a, pos : pos + f.coefs.shape[0]] = f.coefs
        pos += f.coefs.shape[0]
    g = coef @ k @ coef.T
    return 0.5 * (g + g.T)


def gram_matrix(net, kernel: MfBmKernel, specs: Sequence[IncrementSpec], floor: float = PSD_FLOOR) -> np.ndarray:
    if len(specs) == 0:
        raise ValidationError("gram_matrix needs at least one spec")
    for sp in specs:
        _check_nodes(net, sp)
    g = functional_gram(kernel, [sp.functional() for sp in specs])
    check_psd(g, floor)
    return g


def point_gram(kernel: MfBmKernel, nodes, times, floor: float = PSD_FLOOR) -> np.ndarray:
    """Gram matrix of A_{node}(time) over a list of (node, time) points, PSD-gated."""
    nodes = np.asarray(nodes, dtype=int)
    times = np.asarray(times, dtype=float)
    g = kernel.cov(nodes[:, None], nodes[None, :], times[:, None], times[None, :])
    g = 0.5 * (g + g.T)
    check_psd(g, floor)
    return g
