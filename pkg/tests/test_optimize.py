import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from gaussnet import MfBmKernel, Network
from gaussnet.deviations import (
    BOUNDARY,
    CASE1,
    CASE2,
    CASE3,
    LOWER_ONLY,
    TIGHT1,
    DecayResult,
    Grid,
    check_tightness,
    closed_form_fbm,
    decay_lower_bound,
    most_probable_path,
    node_model,
    optimal_t_structure,
)
from gaussnet.deviations.closed_form import g_alpha
from gaussnet.errors import HypothesisViolated, UnsupportedCase, ValidationError

from conftest import FAST, brownian


def single(h, sigma=1.0, mu=2.0, lam=1.0):
    return Network.from_edges([mu], [lam], []), MfBmKernel(np.array([h]), np.array([sigma]), np.eye(1))


def golden_single_queue(b, slack, sigma, h):
    f = lambda x: (b + slack * x) ** 2 / (2 * sigma**2 * x ** (2 * h))  # noqa: E731  x = |t|
    res = minimize_scalar(f, bracket=(0.01, 1.0, 50.0), method="golden", tol=1e-12)
    return res.fun, -res.x


@pytest.mark.parametrize("h", [0.3, 0.5, 0.6, 0.75, 0.9])
def test_isolated_node_matches_one_dimensional_minimum(h):
    net, k = single(h, sigma=1.2, mu=2.5, lam=1.0)
    val, _ = golden_single_queue(0.7, 1.5, 1.2, h)
    res = decay_lower_bound(net, k, 0, 0.7)
    assert res.exponent == pytest.approx(val, rel=1e-9)
    assert res.active_case == BOUNDARY
    if h >= 0.5:
        assert closed_form_fbm(net, k, 0, 0.7).exponent == pytest.approx(val, rel=1e-9)


def test_brownian_single_queue_is_two():
    net, k = single(0.5)
    assert decay_lower_bound(net, k, 0, 1.0).exponent == pytest.approx(2.0, abs=1e-9)
    cf = closed_form_fbm(net, k, 0, 1.0)
    assert cf.exponent == pytest.approx(2.0, abs=1e-12) and cf.condition_holds


def test_closed_form_h075_value():
    net, k = single(0.75)
    want = 0.5 * (1 / 0.25) ** 0.5 * (1 / 0.75) ** 1.5
    assert closed_form_fbm(net, k, 0, 1.0).exponent == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(1.5396, abs=1e-4)


@pytest.mark.parametrize("h,expected", [(0.75, -3.0), (0.5, -1.0)])
def test_optimal_t_structure_values(h, expected):
    net, k = single(h)
    t = optimal_t_structure(net, k, 0, 1.0)
    assert t.values.tolist() == [pytest.approx(expected, rel=1e-14)]
    _, tg = golden_single_queue(1.0, 1.0, 1.0, h)
    assert t.values[0] == pytest.approx(tg, abs=1e-6)


def test_case1_objective_at_closed_form_optimum(transparent_tandem):
    k = MfBmKernel(np.full(2, 0.75), np.array([1.0, 0.8]), np.array([[1.0, 0.3], [0.3, 1.0]]))
    m = node_model(transparent_tandem, k, 1)
    t = optimal_t_structure(transparent_tandem, k, 1, 1.0).values
    cf = closed_form_fbm(transparent_tandem, k, 1, 1.0)
    assert m.case1_objective(1.0, t)[0] == pytest.approx(cf.exponent, rel=1e-9)


def test_alpha_supremum_against_grid(transparent_tandem):
    """Brownian tandem with independent unit sources: g(a) / a = 2 for every a."""
    k = brownian(2)
    cf = closed_form_fbm(transparent_tandem, k, 1, 1.0)
    a = np.arange(1e-4, 1.0, 1e-4)
    grid_sup = np.max(g_alpha(a, 0.5) / a)  # w = 1 for the single upstream path
    assert cf.alpha_sup == pytest.approx(grid_sup, rel=1e-9)
    assert cf.sigma_bar2 == pytest.approx(2.0)
    assert cf.condition_rhs == pytest.approx(grid_sup * 1.0 / (2 * 0.5 * 2.0), rel=1e-9)
    assert cf.condition_lhs == pytest.approx(2.0) and cf.condition_holds


def test_alpha_supremum_fbm_against_grid():
    net = Network.from_edges([3.0, 2.0], [1.0, 0.0], [(0, 1, 0.6)])
    k = MfBmKernel(np.full(2, 0.7), np.array([1.0, 0.5]), np.array([[1.0, 0.4], [0.4, 1.0]]))
    cf = closed_form_fbm(net, k, 1, 1.0)
    w = 1.0 * 0.5 * 0.4 + 1.0 * 1.0 * 1.0 * 0.6
    a = np.arange(1e-4, 1.0, 1e-4)
    assert cf.alpha_sup == pytest.approx(w * np.max(g_alpha(a, 0.7) / a), rel=1e-6)


def test_closed_form_hypotheses():
    net = Network.from_edges([3.0, 2.0], [1.0, 0.0], [(0, 1, 1.0)])
    with pytest.raises(HypothesisViolated):
        closed_form_fbm(net, MfBmKernel(np.full(2, 0.25), np.ones(2), np.eye(2)), 1, 1.0)
    with pytest.raises(HypothesisViolated):
        closed_form_fbm(net, MfBmKernel(np.array([0.6, 0.7]), np.ones(2), np.eye(2)), 1, 1.0)
    with pytest.raises(HypothesisViolated):
        closed_form_fbm(net, MfBmKernel(np.full(2, 0.6), np.ones(2), np.array([[1, -0.2], [-0.2, 1]])), 1, 1.0)
    eta = np.array([[0.0, 0.1], [-0.1, 0.0]])
    with pytest.raises(HypothesisViolated):
        closed_form_fbm(net, MfBmKernel(np.full(2, 0.6), np.ones(2), np.eye(2), eta), 1, 1.0)
    with pytest.raises(HypothesisViolated):
        optimal_t_structure(net, MfBmKernel(np.full(2, 0.25), np.ones(2), np.eye(2)), 1, 1.0)


@pytest.mark.parametrize("h", [0.5, 0.75])
def test_transparent_tandem(transparent_tandem, h):
    k = MfBmKernel(np.full(2, h), np.ones(2), np.eye(2))
    res = decay_lower_bound(transparent_tandem, k, 1, 1.0)
    cf = closed_form_fbm(transparent_tandem, k, 1, 1.0)
    assert cf.condition_holds
    assert res.exponent == pytest.approx(cf.exponent, rel=1e-6)
    v = check_tightness(transparent_tandem, k, 1, 1.0, res)
    assert v.verdict == TIGHT1
    assert v.margins[f"{v.route}_max_violation"] < -1e-7


def test_tight_capacity_tandem_snapshot():
    """Upstream capacity barely above its load; the verdict is recorded, not derived."""
    net = Network.from_edges([1.05, 2.0], [1.0, 0.0], [(0, 1, 1.0)])
    res = decay_lower_bound(net, brownian(2), 1, 1.0, FAST)
    assert res.exponent == pytest.approx(1.9013148795220225, rel=1e-6)
    assert res.active_case == CASE3
    v = check_tightness(net, brownian(2), 1, 1.0, res)
    assert v.verdict == LOWER_ONLY
    assert v.margins["k_minus_c"] > 0 and v.margins["c_minus_h"] > 0


def test_isolated_node_tightness_is_vacuous():
    net, k = single(0.6)
    res = decay_lower_bound(net, k, 0, 1.0)
    v = check_tightness(net, k, 0, 1.0, res)
    assert v.verdict == TIGHT1 and v.route == "vacuous"


def test_result_invariants(diamond, diamond_kernel):
    res = decay_lower_bound(diamond, diamond_kernel, 2, 1.0, FAST)
    m = node_model(diamond, diamond_kernel, 2)
    t, s = res.optimizer_t.values, res.optimizer_s.values
    m.check_domain(t, s)
    assert res.exponent >= 0
    # inner-sup dominance: the reported sup is at least the boundary value at t*
    assert res.exponent >= m.case1_objective(1.0, t)[0] * (1 - 1e-12)
    d = res.to_dict()
    assert d["active_case"] in (BOUNDARY, CASE1, CASE2, CASE3)


def test_b_must_be_positive(tandem):
    with pytest.raises(ValidationError):
        decay_lower_bound(tandem, brownian(2), 1, 0.0)


def test_monotone_in_b_and_mu(diamond, diamond_kernel):
    vals = [decay_lower_bound(diamond, diamond_kernel, 2, b, FAST).exponent for b in (0.5, 1.0, 2.0)]
    assert vals[0] <= vals[1] + 1e-6 and vals[1] <= vals[2] + 1e-6
    mus = []
    for f in (1.0, 0.9, 0.8):
        mu = diamond.mu.copy()
        lbar = node_model(diamond, diamond_kernel, 2).lbar
        mu[2] = lbar + f * (diamond.mu[2] - lbar)
        net = Network(mu, diamond.lam, diamond.routing)
        mus.append(decay_lower_bound(net, diamond_kernel, 2, 1.0, FAST).exponent)
    assert mus[0] + 1e-6 >= mus[1] and mus[1] + 1e-6 >= mus[2]


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_sigma_scaling(diamond, diamond_kernel, c):
    base = decay_lower_bound(diamond, diamond_kernel, 2, 1.0, FAST)
    scaled = decay_lower_bound(diamond, diamond_kernel.scaled(c), 2, 1.0, FAST)
    assert scaled.exponent == pytest.approx(base.exponent / c**2, rel=1e-6)
    assert scaled.active_case == base.active_case
    assert np.allclose(scaled.optimizer_t.values, base.optimizer_t.values, rtol=1e-5, atol=1e-8)


def test_mean_path_isolated_brownian():
    net, k = single(0.5)
    res = decay_lower_bound(net, k, 0, 1.0)
    mp = most_probable_path(net, k, 0, 1.0, res, Grid(-3.0, 0.0, 0.25))
    f = dict(zip(np.round(mp.times, 12), mp.values[0]))
    assert f[0.0] == 0.0
    assert f[-0.5] == pytest.approx(1.0, rel=1e-6)  # slope (b - slack t*) / |t*| = 2 on [t*, 0]
    assert f[-1.0] == pytest.approx(2.0, rel=1e-6)
    assert f[-2.5] == pytest.approx(2.0, rel=1e-6)


def test_mean_path_reproduces_constraint(diamond, diamond_kernel):
    res = decay_lower_bound(diamond, diamond_kernel, 2, 1.0, FAST)
    assert res.active_case in (CASE1, BOUNDARY)
    m = node_model(diamond, diamond_kernel, 2)
    t = res.optimizer_t.values
    ti = t[m.root]
    total = 0.0
    for a, r in enumerate(m.paths):
        j = r[0]
        pts = np.array([t[a], t[a] - ti, 0.0])
        mp = most_probable_path(diamond, diamond_kernel, 2, 1.0, res, Grid(min(pts.min(), -1.0), 0.0, 1.0))
        # evaluate exactly at the needed times with a one-point grid each
        vals = []
        for x in pts[:2]:
            g = most_probable_path(diamond, diamond_kernel, 2, 1.0, res, Grid(x, x, 1.0)) if x < 0 else None
            vals.append(0.0 if g is None else g.values[j, 0])
        total += m.weight[a] * (vals[0] - vals[1])
        assert mp.values[:, -1].tolist() == [0.0] * diamond.k
    assert total == pytest.approx(1.0 - m.slack * ti, rel=1e-9)


def test_case2_path_is_unsupported(tandem):
    res = decay_lower_bound(tandem, brownian(2), 1, 1.0, FAST)
    fake = DecayResult(res.node, res.b, res.exponent, res.optimizer_t, res.optimizer_s, CASE2, None, {})
    with pytest.raises(UnsupportedCase):
        most_probable_path(tandem, brownian(2), 1, 1.0, fake, Grid(-2, 0, 0.5))


def test_case3_path_satisfies_both_constraints():
    net = Network.from_edges([1.05, 2.0], [1.0, 0.0], [(0, 1, 1.0)])
    k = brownian(2)
    res = decay_lower_bound(net, k, 1, 1.0, FAST)
    assert res.active_case == CASE3
    m = node_model(net, k, 1)
    t, s = res.optimizer_t.values, res.optimizer_s.values
    ti = t[m.root]

    def f(j, x):
        if x == 0:
            return 0.0
        return most_probable_path(net, k, 1, 1.0, res, Grid(x, x, 1.0)).values[j, 0]

    x_val = sum(m.weight[a] * (f(r[0], t[a]) - f(r[0], t[a] - ti)) for a, r in enumerate(m.paths))
    w_val = sum(m.weight[a] * (f(r[0], s[a]) - f(r[0], t[a] - ti)) for a, r in enumerate(m.paths))
    ev = m.evaluate(1.0, t, s)
    assert x_val == pytest.approx(ev["y0"][0], rel=1e-8)
    assert w_val == pytest.approx(ev["c"][0], rel=1e-8, abs=1e-10)
