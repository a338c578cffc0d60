"""Acyclic networks of single-server queues with deterministic routing.

Nodes are dense 0-based integers. Routing is a dense ``k x k`` matrix whose
off-diagonal entry ``p[i, j]`` is the fraction of work leaving node ``i`` that
is sent to node ``j``; whatever is not routed leaves the network.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Optional, Sequence

import numpy as np

from .errors import (
    CyclicGraph,
    InvalidPath,
    RoutingRowExceedsOne,
    TooManyPaths,
    Unstable,
    ValidationError,
)

Path = tuple[int, ...]

DEFAULT_PATH_CAP = 64
NEAR_CRITICAL = 1e-9
_ROW_SUM_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Network:
    mu: np.ndarray
    lam: np.ndarray
    routing: np.ndarray
    path_cap: int = DEFAULT_PATH_CAP

    def __post_init__(self):
        mu = _frozen(self.mu)
        lam = _frozen(self.lam)
        p = np.array(self.routing, dtype=float, copy=True)
        k = mu.shape[0]
        if mu.ndim != 1 or lam.shape != (k,) or p.shape != (k, k):
            raise ValidationError("mu, lambda and routing must have shapes (k,), (k,), (k, k)")
        if k == 0:
            raise ValidationError("network has no nodes")
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(lam)) or not np.all(np.isfinite(p)):
            raise ValidationError("network parameters must be finite")
        if np.any(mu <= 0):
            raise ValidationError("service rates must be positive")
        if np.any(lam < 0):
            raise ValidationError("drifts must be nonnegative")
        np.fill_diagonal(p, 0.0)
        if np.any(p < 0) or np.any(p > 1):
            raise ValidationError("routing fractions must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "routing", p)

    @classmethod
    def from_edges(cls, mu, lam, edges: Sequence[tuple[int, int, float]], path_cap: int = DEFAULT_PATH_CAP):
        k = len(mu)
        p = np.zeros((k, k))
        for a, b, frac in edges:
            if not (0 <= a < k and 0 <= b < k):
                raise ValidationError(f"edge ({a}, {b}) references an unknown node")
            if a == b:
                raise CyclicGraph(f"self-loop at node {a}")
            p[a, b] += frac
        return cls(mu, lam, p, path_cap)

    @property
    def k(self) -> int:
        return self.mu.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        a, b = np.nonzero(self.routing)
        return list(zip(a.tolist(), b.tolist()))

    def in_neighbors(self, i: int) -> list[int]:
        return np.nonzero(self.routing[:, i])[0].tolist()

    def leave_fraction(self, i: int) -> float:
        return 1.0 - float(self.routing[i].sum())

    def topological_order(self) -> list[int]:
        ts = TopologicalSorter({i: self.in_neighbors(i) for i in range(self.k)})
        try:
            return list(ts.static_order())
        except CycleError as exc:
            raise CyclicGraph(f"routing graph has a cycle through nodes {exc.args[1]}") from None

    def inflow_capacity(self, i: int) -> float:
        """Sum of mu_j p_{j,i} over inbound neighbours j."""
        return float(self.mu @ self.routing[:, i])


@dataclass(frozen=True)
class ValidationReport:
    order: list[int]
    effective_rates: np.ndarray
    slack: np.ndarray
    near_critical: list[int] = field(default_factory=list)


def effective_rates(net: Network, order: Optional[list[int]] = None) -> np.ndarray:
    """Total work arrival rates, solved in topological order.

    ``lbar_i = lambda_i + sum_j p_{j,i} lbar_j``, which equals the path sum
    of lambda_{r_1} Pi_r over all paths ending at i.
    """
    order = net.topological_order() if order is None else order
    lbar = np.zeros(net.k)
    for i in order:
        lbar[i] = net.lam[i] + float(net.routing[:, i] @ lbar)
    return lbar


def validate_network(net: Network) -> ValidationReport:
    order = net.topological_order()
    rows = net.routing.sum(axis=1)
    for i in range(net.k):
        if rows[i] > 1.0 + _ROW_SUM_TOL:
            raise RoutingRowExceedsOne(i, float(rows[i]))
    lbar = effective_rates(net, order)
    slack = net.mu - lbar
    for i in range(net.k):
        if not slack[i] > 0.0:
            raise Unstable(i, float(slack[i]))
    near = [i for i in range(net.k) if slack[i] < NEAR_CRITICAL * net.mu[i]]
    if near:
        warnings.warn(f"nodes {near} are near-critical (slack < {NEAR_CRITICAL} * mu)", RuntimeWarning, stacklevel=2)
    return ValidationReport(order=order, effective_rates=_frozen(lbar), slack=_frozen(slack), near_critical=near)


def enumerate_paths(net: Network, i: int, min_len: int = 1) -> list[Path]:
    """All directed paths with at least ``min_len`` nodes ending at ``i``, sorted lexicographically."""
    if not 0 <= i < net.k:
        raise ValidationError(f"node {i} out of range")
    if min_len < 1:
        raise ValidationError("min_len must be >= 1")
    net.topological_order()  # raises on cycles; DFS below assumes a DAG
    found: list[Path] = []
    stack: list[Path] = [(i,)]
    while stack:
        r = stack.pop()
        found.append(r)
        if len(found) > net.path_cap:
            raise TooManyPaths(f"more than {net.path_cap} paths end at node {i}; raise path_cap to allow this")
        for j in net.in_neighbors(r[0]):
            stack.append((j,) + r)
    return sorted(r for r in found if len(r) >= min_len)


def path_weight(net: Network, r: Sequence[int]) -> float:
    r = tuple(int(x) for x in r)
    if len(r) == 0 or any(not 0 <= x < net.k for x in r):
        raise InvalidPath(f"path {r} references unknown nodes")
    if len(set(r)) != len(r):
        raise InvalidPath(f"path {r} repeats a node")
    w = 1.0
    for a, b in zip(r[:-1], r[1:]):
        if net.routing[a, b] <= 0.0:
            raise InvalidPath(f"({a}, {b}) is not an edge of the network")
        w *= float(net.routing[a, b])
    return w


def upstream_nodes(net: Network, i: int) -> list[int]:
    return sorted({r[0] for r in enumerate_paths(net, i, 2)})


@dataclass(frozen=True)
class NodeAggregates:
    effective_rate: float
    aggregate_variance: Optional[float] = None


def aggregate_variance(net: Network, sigma, rho, i: int) -> float:
    """Variance per unit time^{2H} of the superposed upstream input of node i."""
    sigma = np.asarray(sigma, dtype=float)
    rho = np.asarray(rho, dtype=float)
    up = enumerate_paths(net, i, 2)
    total = sigma[i] ** 2
    for r in up:
        inner = 2.0 * sigma[r[0]] * sigma[i] * rho[r[0], i]
        for q in up:
            inner += sigma[r[0]] * sigma[q[0]] * rho[r[0], q[0]] * path_weight(net, q)
        total += inner * path_weight(net, r)
    return float(total)


def node_aggregates(net: Network, kernel=None, i: int = 0) -> NodeAggregates:
    report = validate_network(net)
    var = None
    if kernel is not None:
        var = aggregate_variance(net, kernel.sigma, kernel.rho, i)
    return NodeAggregates(float(report.effective_rates[i]), var)


def require_stable(net: Network) -> ValidationReport:
    """Validation used by the analysis routines: near-critical nodes are rejected."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = validate_network(net)
    if report.near_critical:
        i = report.near_critical[0]
        raise Unstable(i, float(report.slack[i]))
    return report
