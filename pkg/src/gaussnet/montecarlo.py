"""Many-sources simulation on a uniform time grid.

The n-source superposition is sampled directly as one Gaussian process with
mean ``n * lambda * t`` and covariance ``n * Sigma``. Stationary increments are
drawn by multivariate circulant embedding, with a dense eigen-factorisation as
fallback. Queues follow the discrete Lindley recursion in topological order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .errors import AllZeroCounts, NotPSD, TooManyCombinations, ValidationError
from .kernel import PSD_FLOOR, MfBmKernel, point_gram
from .network import Network, enumerate_paths, path_weight, require_stable

BLOCK = 1000  # replications per derived seed; fixed so results do not depend on chunking
_GRID_TOL = 1e-9


@dataclass(frozen=True)
class SimGrid:
    """Uniform grid ``start, start + step, ..., stop``."""

    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not (self.step > 0 and self.stop > self.start):
            raise ValidationError("grid needs step > 0 and stop > start")
        n = (self.stop - self.start) / self.step
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ValidationError("grid span must be a whole number of steps")

    @property
    def steps(self) -> int:
        return int(round((self.stop - self.start) / self.step))

    def times(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.steps + 1)

    def zero_index(self) -> Optional[int]:
        m = -self.start / self.step
        if abs(m - round(m)) <= _GRID_TOL * max(1.0, abs(m)) and 0 <= round(m) <= self.steps:
            return int(round(m))
        return None


@dataclass(frozen=True)
class SampledPaths:
    times: np.ndarray
    values: np.ndarray  # (k, N + 1): A^(n)_j at each grid time, zero at time 0


@dataclass(frozen=True)
class QueueTrajectories:
    times: np.ndarray
    queue: np.ndarray  # (k, N + 1)
    departures: np.ndarray  # cumulative since grid start
    inputs: np.ndarray  # cumulative since grid start


@dataclass(frozen=True)
class SimConfig:
    scales: tuple[int, ...]
    b: float
    dt: Optional[float] = None
    horizon: Optional[float] = None
    burn_in: Optional[float] = None
    replications: int = 1000
    seed: int = 0
    confidence: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(int(n) for n in self.scales))
        if not self.scales or any(n < 1 for n in self.scales):
            raise ValidationError("scales must be positive integers")
        if not self.b > 0:
            raise ValidationError("b must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.replications < 1:
            raise ValidationError("replications must be at least 1")
        if self.horizon is not None and self.burn_in is not None and not self.burn_in < self.horizon:
            raise ValidationError("burn-in must be shorter than the horizon")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")


@dataclass
class ScaleEstimate:
    n: int
    count: int
    trials: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    effective_trials: float


@dataclass
class OverflowEstimate:
    node: int
    b: float
    per_scale: list[ScaleEstimate]
    exponent: float
    intercept: float
    residuals: list[float]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "b": self.b,
            "exponent": self.exponent,
            "intercept": self.intercept,
            "residuals": self.residuals,
            "per_scale": [vars(s) for s in self.per_scale],
            "metadata": self.metadata,
        }

    def to_csv(self) -> str:
        lines = ["n,count,trials,p_hat,ci_lo,ci_hi"]
        for s in self.per_scale:
            lines.append(f"{s.n},{s.count},{s.trials},{s.p_hat!r},{s.ci_lo!r},{s.ci_hi!r}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- sampling
def increment_autocov(kernel: MfBmKernel, dt: float, lags: np.ndarray) -> np.ndarray:
    """gamma[h, i, j] = Cov(A_i(dt) - A_i(0), A_j((h+1) dt) - A_j(h dt))."""
    k = kernel.k
    h = np.asarray(lags, dtype=float)[:, None, None]
    ii = np.arange(k)[None, :, None]
    jj = np.arange(k)[None, None, :]
    c = kernel.cov
    return c(ii, jj, dt, (h + 1) * dt) - c(ii, jj, dt, h * dt) - c(ii, jj, 0.0, (h + 1) * dt) + c(ii, jj, 0.0, h * dt)


class IncrementSampler:
    """Draws standardized increments of the k-dimensional process on N steps of size dt."""

    def __init__(self, kernel: MfBmKernel, dt: float, steps: int, floor: float = PSD_FLOOR):
        self.k, self.dt, self.N = kernel.k, dt, steps
        self.method = "circulant"
        try:
            self._setup_circulant(kernel, floor)
        except NotPSD:
            self.method = "dense"
            self._setup_dense(kernel, floor)

    def _setup_circulant(self, kernel, floor):
        N, k = self.N, self.k
        M = 2 * N + 1
        lags = np.concatenate([np.arange(N + 1), np.arange(N + 1, M) - M])
        C = increment_autocov(kernel, self.dt, lags)  # (M, k, k)
        S = M * np.fft.ifft(C, axis=0)
        S = 0.5 * (S + np.conj(np.swapaxes(S, 1, 2)))
        lam, U = np.linalg.eigh(S)
        scale = max(float(np.max(lam)), 1e-300)
        if float(np.min(lam)) < -floor * scale:
            raise NotPSD(float(np.min(lam)), -floor * scale)
        self.M = M
        self.B = U * np.sqrt(np.clip(lam, 0.0, None))[:, None, :]  # (M, k, k)

    def _setup_dense(self, kernel, floor):
        N, k = self.N, self.k
        nodes = np.repeat(np.arange(k), N)
        starts = np.tile(np.arange(N) * self.dt, k)
        ends = starts + self.dt
        c = kernel.cov
        ni, nj = nodes[:, None], nodes[None, :]
        G = c(ni, nj, ends[:, None], ends[None, :]) - c(ni, nj, ends[:, None], starts[None, :])
        G -= c(ni, nj, starts[:, None], ends[None, :]) - c(ni, nj, starts[:, None], starts[None, :])
        G = 0.5 * (G + G.T)
        lam, U = np.linalg.eigh(G)
        scale = max(1.0, float(np.max(np.abs(np.diag(G)))))
        if lam[0] < -floor * scale:
            raise NotPSD(float(lam[0]), -floor * scale)
        self.L = U * np.sqrt(np.clip(lam, 0.0, None))[None, :]

    def sample(self, rng: np.random.Generator, reps: int) -> np.ndarray:
        """Array (reps, k, N) of increments."""
        N, k = self.N, self.k
        if self.method == "dense":
            z = rng.standard_normal((reps, N * k))
            return (z @ self.L.T).reshape(reps, k, N)
        half = (reps + 1) // 2
        z = rng.standard_normal((half, self.M, k, 2))
        xi = (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)
        y = np.einsum("fab,rfb->rfa", self.B, xi)
        zz = math.sqrt(self.M) * np.fft.ifft(y, axis=1)[:, :N, :]
        out = np.concatenate([math.sqrt(2.0) * zz.real, math.sqrt(2.0) * zz.imag], axis=0)[:reps]
        return np.ascontiguousarray(np.swapaxes(out, 1, 2))


def _net_kernel_check(net: Network, kernel: MfBmKernel):
    if kernel.k != net.k:
        raise ValidationError("kernel and network have different node counts")


def sample_gaussian_paths(net: Network, kernel: MfBmKernel, grid: SimGrid, n: int, seed: int) -> SampledPaths:
    """One realization of A^(n) on the grid, normalised so that A^(n)(0) = 0."""
    _net_kernel_check(net, kernel)
    if n < 1:
        raise ValidationError("n must be a positive integer")
    rng = np.random.default_rng(seed)
    times = grid.times()
    z0 = grid.zero_index()
    if z0 is not None:
        inc = IncrementSampler(kernel, grid.step, grid.steps).sample(rng, 1)[0]
        cum = np.concatenate([np.zeros((net.k, 1)), np.cumsum(inc, axis=1)], axis=1)
        hat = cum - cum[:, z0 : z0 + 1]
    else:
        nodes = np.repeat(np.arange(net.k), times.size)
        g = point_gram(kernel, nodes, np.tile(times, net.k))
        lam, U = np.linalg.eigh(g)
        L = U * np.sqrt(np.clip(lam, 0.0, None))[None, :]
        hat = (L @ rng.standard_normal(L.shape[1])).reshape(net.k, times.size)
    values = math.sqrt(n) * hat + n * net.lam[:, None] * times[None, :]
    return SampledPaths(times, values)


# ------------------------------------------------------------------ queues
def _lindley(net: Network, order: Sequence[int], dA: np.ndarray, n: int, dt: float, record: bool):
    """dA: (R, k, N) input increments. Returns final state or full trajectories."""
    R, k, N = dA.shape
    p = net.routing
    service = n * net.mu * dt
    q = np.zeros((R, k))
    senders = [np.nonzero(p[:, j])[0] for j in range(k)]
    if record:
        Q = np.zeros((R, k, N + 1))
        D = np.zeros((R, k, N + 1))
        I = np.zeros((R, k, N + 1))
    dD = np.zeros((R, k))
    for m in range(N):
        for j in order:
            dI = dA[:, j, m].copy()
            for l in senders[j]:
                dI += p[l, j] * dD[:, l]
            before = q[:, j]
            after = np.maximum(0.0, before + dI - service[j])
            dD[:, j] = before + dI - after
            q[:, j] = after
            if record:
                I[:, j, m + 1] = I[:, j, m] + dI
        if record:
            Q[:, :, m + 1] = q
            D[:, :, m + 1] = D[:, :, m] + dD
    if record:
        return Q, D, I
    return q


def simulate_queues(net: Network, paths: SampledPaths, n: int, grid: SimGrid) -> QueueTrajectories:
    """Lindley recursion from empty queues at the start of the grid."""
    order = net.topological_order()
    dA = np.diff(paths.values, axis=1)[None, :, :]
    Q, D, I = _lindley(net, order, dA, n, grid.step, True)
    return QueueTrajectories(paths.times, Q[0], D[0], I[0])


def _overflow_fractions(net, order, sampler, i, n, lam, dt, threshold, burn_steps, rng, reps):
    """Fraction of post-burn-in grid times with Q_i > threshold, per replication."""
    dA = math.sqrt(n) * sampler.sample(rng, reps) + (n * lam * dt)[None, :, None]
    R, k, N = dA.shape
    p = net.routing
    service = n * net.mu * dt
    q = np.zeros((R, k))
    dD = np.zeros((R, k))
    senders = [np.nonzero(p[:, j])[0] for j in range(k)]
    hits = np.zeros(R)
    for m in range(N):
        for j in order:
            dI = dA[:, j, m]
            for l in senders[j]:
                dI = dI + p[l, j] * dD[:, l]
            before = q[:, j]
            after = np.maximum(0.0, before + dI - service[j])
            dD[:, j] = before + dI - after
            q[:, j] = after
        if m + 1 > burn_steps:
            hits += q[:, i] > threshold
    return hits / (N - burn_steps)


def wilson(p: float, n_eff: float, confidence: float) -> tuple[float, float]:
    z = norm.ppf(0.5 + confidence / 2)
    denom = 1 + z * z / n_eff
    centre = (p + z * z / (2 * n_eff)) / denom
    half = z * math.sqrt(p * (1 - p) / n_eff + z * z / (4 * n_eff * n_eff)) / denom
    return float(max(0.0, centre - half)), float(min(1.0, centre + half))


def default_time_scale(net: Network, kernel: MfBmKernel, i: int, b: float) -> float:
    """Isolated-queue optimal |t| with the weight-averaged Hurst index of the feeding paths."""
    report = require_stable(net)
    paths = enumerate_paths(net, i, 1)
    w = np.array([path_weight(net, r) for r in paths])
    h = float(np.average(kernel.hurst[[r[0] for r in paths]], weights=w))
    h = min(max(h, 0.05), 0.95)
    return b / float(report.slack[i]) * h / (1 - h)


def estimate_overflow(net: Network, kernel: MfBmKernel, i: int, config: SimConfig) -> OverflowEstimate:
    _net_kernel_check(net, kernel)
    require_stable(net)
    tstar = default_time_scale(net, kernel, i, config.b)
    dt = config.dt if config.dt is not None else tstar / 50.0
    horizon = config.horizon if config.horizon is not None else 20.0 * tstar
    burn = config.burn_in if config.burn_in is not None else max(10.0 * tstar, horizon / 2.0)
    if not burn < horizon:
        raise ValidationError("burn-in must be shorter than the horizon")
    steps = max(2, int(round(horizon / dt)))
    burn_steps = min(steps - 1, int(round(burn / dt)))
    sampler = IncrementSampler(kernel, dt, steps)
    order = net.topological_order()
    per = []
    for n in config.scales:
        fracs = []
        for block in range(math.ceil(config.replications / BLOCK)):
            reps = min(BLOCK, config.replications - block * BLOCK)
            rng = np.random.default_rng(np.random.SeedSequence([config.seed, n, block]))
            fracs.append(_overflow_fractions(net, order, sampler, i, n, net.lam, dt, n * config.b, burn_steps, rng, reps))
        f = np.concatenate(fracs)
        window = steps - burn_steps
        trials = f.size * window
        count = int(round(float(f.sum()) * window))
        p_hat = float(f.mean())
        var = float(f.var(ddof=1)) / f.size if f.size > 1 else 0.0
        n_eff = p_hat * (1 - p_hat) / var if var > 0 else float(trials)
        n_eff = float(min(max(n_eff, 1.0), trials))
        lo, hi = wilson(p_hat, n_eff, config.confidence)
        per.append(ScaleEstimate(n, count, trials, p_hat, lo, hi, n_eff))
    good = [s for s in per if s.count > 0]
    if len(good) < 2 and len(per) > 1 or not good:
        raise AllZeroCounts(
            f"overflow observed at {len(good)} of {len(per)} scales",
            "use smaller scales n, a smaller b, or more replications",
        )
    if len(good) < len(per):
        warnings.warn("scales with zero overflow counts were left out of the fit", RuntimeWarning, stacklevel=2)
    ns = np.array([s.n for s in good], dtype=float)
    y = -np.log([s.p_hat for s in good])
    if len(good) >= 2:
        A = np.vstack([ns, np.ones_like(ns)]).T
        (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = (y - A @ np.array([slope, icpt])).tolist()
    else:
        slope, icpt, resid = float(y[0] / ns[0]), 0.0, [0.0]
    meta = {
        "dt": dt,
        "horizon": horizon,
        "burn_in": burn_steps * dt,
        "sampler": sampler.method,
        "replications": config.replications,
        "seed": config.seed,
        "caveat": "stationarity approximated by burn-in from empty queues; grid discretisation biases sups downward",
        "scales_used": [s.n for s in good],
    }
    return OverflowEstimate(i, config.b, per, float(slope), float(icpt), [float(r) for r in resid], meta)


# ------------------------------------------------------- input-formula check
def _input_terms(net: Network, paths: SampledPaths, n: int, zero: int, i: int):
    P2 = enumerate_paths(net, i, 2)
    index = {r: a for a, r in enumerate(P2)}
    times = paths.times
    gains, costs, parents = [], [], []
    for r in P2:
        j = r[0]
        w = path_weight(net, r)
        a_to_0 = paths.values[j, zero] - paths.values[j]  # A_j(tau, 0)
        gains.append(w * (a_to_0 + n * net.mu[j] * times))
        costs.append(w * n * net.mu[j] * times)
        parents.append(index.get(r[1:], -1))
    return P2, gains, costs, parents


def _sup_dp(P2, gains, costs, parents, top: int) -> float:
    """Exact grid sup by dynamic programming over the path tree (children before parents)."""
    if not P2:
        return 0.0
    order = sorted(range(len(P2)), key=lambda a: -len(P2[a]))
    acc = [np.array(g, dtype=float) for g in gains]
    best = [None] * len(P2)
    total = 0.0
    for a in order:
        env = np.maximum.accumulate(acc[a])
        best[a] = env - costs[a]  # value as a function of the parent's index
        p = parents[a]
        if p >= 0:
            acc[p] = acc[p] + best[a]
        else:
            total += float(best[a][top])
    return total


def _sup_enumerate(P2, gains, costs, parents, top: int, limit: float) -> float:
    if not P2:
        return 0.0
    order = sorted(range(len(P2)), key=lambda a: len(P2[a]))  # parents first
    # admissible assignments per subtree, as a function of the parent's index
    sub = [np.ones(top + 1) for _ in P2]
    for a in sorted(range(len(P2)), key=lambda a: -len(P2[a])):
        sub[a] = np.cumsum(sub[a])
        p = parents[a]
        if p >= 0:
            sub[p] = sub[p] * sub[a]
    count = float(np.prod([sub[a][top] for a in range(len(P2)) if parents[a] < 0]))
    if count > limit:
        raise TooManyCombinations(f"{count:.3g} grid combinations exceed the limit {limit:.3g}")
    best = -math.inf

    def rec(pos: int, assign: dict):
        nonlocal best
        if pos == len(order):
            val = 0.0
            for a in range(len(P2)):
                pt = top if parents[a] < 0 else assign[parents[a]]
                val += gains[a][assign[a]] - costs[a][pt]
            best = max(best, val)
            return
        a = order[pos]
        hi = top if parents[a] < 0 else assign[parents[a]]
        for m in range(hi + 1):
            assign[a] = m
            rec(pos + 1, assign)
        del assign[a]

    rec(0, {})
    return best


def input_formula_sides(
    net: Network,
    paths: SampledPaths,
    n: int,
    grid: SimGrid,
    i: int,
    t_indices: Sequence[int],
    method: str = "dp",
    max_combinations: float = 1e7,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulated I_i(t, 0) and its expression in the exogenous inputs, for several grid times t."""
    if method not in ("dp", "enumerate"):
        raise ValidationError("method must be 'dp' or 'enumerate'")
    if not 0 <= i < net.k:
        raise ValidationError(f"node {i} out of range")
    zero = grid.zero_index()
    if zero is None:
        raise ValidationError("the grid must contain time 0")
    t_indices = [int(m) for m in t_indices]
    if any(not 0 <= m < zero for m in t_indices):
        raise ValidationError("time indices must point to grid times before 0")
    traj = simulate_queues(net, paths, n, grid)
    P2, gains, costs, parents = _input_terms(net, paths, n, zero, i)
    if method == "dp":
        sup = lambda top: _sup_dp(P2, gains, costs, parents, top)  # noqa: E731
    else:
        sup = lambda top: _sup_enumerate(P2, gains, costs, parents, top, max_combinations)  # noqa: E731
    at_zero = sup(zero)
    lhs = np.array([traj.inputs[i, zero] - traj.inputs[i, m] for m in t_indices])
    rhs = np.array([paths.values[i, zero] - paths.values[i, m] + sup(m) - at_zero for m in t_indices])
    return lhs, rhs


def verify_input_formula(
    net: Network,
    paths: SampledPaths,
    n: int,
    grid: SimGrid,
    i: int,
    t_index: int,
    method: str = "dp",
    max_combinations: float = 1e7,
) -> tuple[float, float]:
    """Compare the simulated input I_i(t, 0) with its closed expression in the exogenous inputs."""
    lhs, rhs = input_formula_sides(net, paths, n, grid, i, [t_index], method, max_combinations)
    return float(lhs[0]), float(rhs[0])
