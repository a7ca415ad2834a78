from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from infowelfare.costs import (
    REPORT_PAIRS,
    CostPair,
    _checked,
    annual_cost,
    annual_error_slope,
    cost,
    cost_report,
    cumulated_cost,
    limit_reference,
    taylor_reference,
)
from infowelfare.errors import ConsistencyError, UnsupportedLimit, ZeroHorizon
from infowelfare.model import (
    InvestorProfile,
    InvestorType,
    MarketParams,
    excess_log_growth,
    feasibility_check,
    gamma_bound,
    horizon_bound,
    value,
)

U, M, R, I = InvestorType.U, InvestorType.M, InvestorType.R, InvestorType.I
ADJACENT = ("UM", "MR", "RI")


def pct(x):
    return 100.0 * x


# ---------------------------------------------------------------------------
# Pairs
# ---------------------------------------------------------------------------


def test_cost_pair_parsing():
    assert CostPair.parse("um") == (U, M)
    assert CostPair.parse("RI").label == "RI"
    with pytest.raises(ValueError):
        CostPair.parse("IU")
    with pytest.raises(ValueError):
        CostPair.parse("UX")
    assert [p.label for p in REPORT_PAIRS] == ["UM", "MR", "RI", "UI"]


def test_self_pairs_cost_nothing(table_params):
    profile = InvestorProfile(3.0, 10.0)
    for k in "UMRI":
        assert cumulated_cost(k + k, table_params, profile) == 0.0
        assert annual_cost(k + k, table_params, profile) == 0.0


# ---------------------------------------------------------------------------
# Reference examples
# ---------------------------------------------------------------------------


def test_log_case_example(table_params):
    profile = InvestorProfile(1.0, 10.0)
    assert round(pct(cumulated_cost("UM", table_params, profile)), 2) == 0.48
    assert round(pct(cumulated_cost("RI", table_params, profile)), 2) == 6.53
    assert cumulated_cost("MR", table_params, profile) == 0.0
    v0 = table_params.v0
    th2 = table_params.theta0 ** 2
    # log-utility closed forms
    assert cumulated_cost("RI", table_params, profile) == pytest.approx(1 - (1 + v0 * 10) ** -0.5, rel=1e-14)
    assert cumulated_cost("UM", table_params, profile) == pytest.approx(
        1 - math.exp(-(v0 * 10 - math.log1p(v0 * 10)) / 2), rel=1e-12
    )
    assert th2 > 0


def test_zero_horizon_costs_nothing(table_params):
    for g in (0.8, 1.0, 3.0):
        for pair in REPORT_PAIRS:
            assert cumulated_cost(pair, table_params, InvestorProfile(g, 0.0)) == 0.0


def test_low_volatility_example(low_vol_params):
    profile = InvestorProfile(0.8, 20.0)
    got = [round(pct(cumulated_cost(p, low_vol_params, profile)), 2) for p in REPORT_PAIRS]
    assert got == [15.34, 3.27, 27.20, 40.38]


def test_annual_examples(table_params, low_vol_params):
    v0 = table_params.v0
    c = annual_cost("RI", table_params, InvestorProfile(1.0, 30.0))
    assert round(pct(c), 2) == 0.60
    assert c == pytest.approx(1 - (1 + v0 * 30) ** (-1 / 60), rel=1e-13)
    got = [round(pct(annual_cost(p, low_vol_params, InvestorProfile(3.0, 10.0))), 2) for p in REPORT_PAIRS]
    assert got == [0.19, 0.04, 0.40, 0.64]
    assert annual_cost("MR", table_params, InvestorProfile(1.0, 7.0)) == 0.0


def test_annual_requires_positive_horizon(table_params):
    with pytest.raises(ZeroHorizon):
        annual_cost("RI", table_params, InvestorProfile(3.0, 0.0))
    with pytest.raises(ZeroHorizon):
        cost_report("annual", table_params, InvestorProfile(3.0, 0.0))


def test_report_errors_examples(table_params, low_vol_params):
    rep = cost_report("cumulated", low_vol_params, InvestorProfile(6.0, 30.0))
    assert round(pct(abs(rep.approx_error)), 2) == 1.69
    rep = cost_report("annual", low_vol_params, InvestorProfile(0.8, 30.0))
    # the exact error is 0.0355%; the printed 0.03 is |3.42 - (1.56 + 0.40 + 1.49)|,
    # the error of the rounded cells
    assert abs(pct(abs(rep.approx_error)) - 0.03) <= 0.02
    cells = [round(pct(c), 2) for c in (rep.c_UM, rep.c_MR, rep.c_RI, rep.c_UI)]
    assert cells == [1.56, 0.40, 1.49, 3.42]
    assert round(abs(cells[3] - sum(cells[:3])), 2) == 0.03


def test_error_is_second_order_when_costs_are_tiny(table_params):
    rep = cost_report("cumulated", table_params, InvestorProfile(3.0, 1e-5))
    assert max(rep.c_UM, rep.c_MR, rep.c_RI, rep.c_UI) < 1e-6
    assert abs(rep.approx_error) < 1e-11
    # annual c^RI tends to 1 - exp(-v0/(2 gamma)) as T -> 0, so small annual
    # costs need a small prior variance
    quiet = MarketParams(r=0.05, sigma=0.2, theta0=0.4, v0=1e-6)
    rep = cost_report("annual", quiet, InvestorProfile(3.0, 1.0))
    assert max(rep.c_UM, rep.c_MR, rep.c_RI, rep.c_UI) < 1e-6
    assert abs(rep.approx_error) < 1e-11


def test_unknown_kind(table_params):
    with pytest.raises(ValueError):
        cost("weekly", "UM", table_params, InvestorProfile(3.0, 10.0))


# ---------------------------------------------------------------------------
# Structural identities
# ---------------------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(
    st.floats(0.2, 12.0),
    st.floats(1e-3, 30.0),
    st.floats(0.0, 1.0),
    st.floats(1e-4, 0.1),
)
def test_report_invariants(gamma, T, theta0, v0):
    params = MarketParams(0.05, 0.2, theta0, v0)
    profile = InvestorProfile(gamma, T)
    assume(feasibility_check(params, profile))
    assume(cumulated_cost("UI", params, profile) <= 0.999)
    cum = cost_report("cumulated", params, profile)
    ann = cost_report("annual", params, profile)
    assert cum.c_UI == pytest.approx(1 - (1 - cum.c_UM) * (1 - cum.c_MR) * (1 - cum.c_RI), abs=1e-12)
    for c_cum, c_ann in zip(
        (cum.c_UM, cum.c_MR, cum.c_RI, cum.c_UI), (ann.c_UM, ann.c_MR, ann.c_RI, ann.c_UI)
    ):
        assert 0.0 <= c_cum < 1.0 and 0.0 <= c_ann < 1.0
        assert c_ann == pytest.approx(1 - (1 - c_cum) ** (1 / T), abs=1e-12)
        assert c_cum == pytest.approx(1 - (1 - c_ann) ** T, abs=1e-12)
    for rep in (cum, ann):
        assert rep.approx_error == rep.c_UI - (rep.c_UM + rep.c_MR + rep.c_RI)


def test_non_adjacent_pairs_compose(table_params):
    profile = InvestorProfile(3.0, 10.0)
    c = {p: cumulated_cost(p, table_params, profile) for p in ("UM", "MR", "RI", "UR", "MI")}
    assert c["UR"] == pytest.approx(1 - (1 - c["UM"]) * (1 - c["MR"]), abs=1e-15)
    assert c["MI"] == pytest.approx(1 - (1 - c["MR"]) * (1 - c["RI"]), abs=1e-15)


def test_shares_sum_to_one(table_params):
    rep = cost_report("cumulated", table_params, InvestorProfile(3.0, 10.0))
    assert sum(rep.shares()) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ZeroDivisionError):
        cost_report("cumulated", table_params, InvestorProfile(3.0, 0.0)).shares()


def test_negative_cost_is_an_error():
    profile = InvestorProfile(3.0, 10.0)
    with pytest.raises(ConsistencyError):
        _checked(-1e-9, CostPair.parse("UM"), profile)
    assert _checked(-1e-13, CostPair.parse("UM"), profile) == 0.0
    assert math.copysign(1.0, _checked(-0.0, CostPair.parse("MR"), profile)) == 1.0


@settings(max_examples=300, deadline=None)
@given(
    st.floats(0.05, 12.0),
    st.floats(1e-3, 30.0),
    st.floats(0.0, 1.0),
    st.floats(1e-4, 0.1),
)
def test_costs_below_one_unless_unrepresentable(gamma, T, theta0, v0):
    """A float cost reaches 1.0 only when the exact ``1 - C`` is below double resolution."""
    params = MarketParams(0.05, 0.2, theta0, v0)
    profile = InvestorProfile(gamma, T)
    assume(feasibility_check(params, profile))
    for pair in REPORT_PAIRS:
        c = cumulated_cost(pair, params, profile)
        assert 0.0 <= c <= 1.0
        if c == 1.0:
            log_retained = excess_log_growth(pair.src, params, profile) - excess_log_growth(
                pair.dst, params, profile
            )
            assert log_retained < math.log(2.0 ** -53)


def _implicit_cost(pair, x, params, profile):
    """Solve ``V^i(x) = V^j(x(1 - C))`` for ``C`` by root finding."""
    pair = CostPair.parse(pair)
    target = value(pair.src, x, params, profile)

    def gap(c):
        return value(pair.dst, x * (1.0 - c), params, profile) - target

    return brentq(gap, 0.0, 1.0 - 1e-12, xtol=1e-15, rtol=1e-15, maxiter=500)


@pytest.mark.parametrize("gamma,T", [(3.0, 10.0), (0.8, 20.0), (1.0, 10.0), (11.0, 30.0), (6.0, 5.0)])
@pytest.mark.parametrize("pair", ADJACENT + ("UI",))
def test_wealth_independence(gamma, T, pair, table_params):
    profile = InvestorProfile(gamma, T)
    closed = cumulated_cost(pair, table_params, profile)
    for x in (0.5, 1.0, 7.0):
        assert _implicit_cost(pair, x, table_params, profile) == pytest.approx(closed, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.2, 12.0),
    st.floats(1e-2, 30.0),
    st.floats(0.0, 1.0),
    st.floats(1e-4, 0.1),
    st.sampled_from([0.5, 1.0, 7.0]),
)
def test_definition_consistency(gamma, T, theta0, v0, x):
    params = MarketParams(0.05, 0.2, theta0, v0)
    profile = InvestorProfile(gamma, T)
    assume(feasibility_check(params, profile))
    assume(cumulated_cost("UI", params, profile) <= 0.999)
    for pair in ADJACENT:
        p = CostPair.parse(pair)
        c = cumulated_cost(p, params, profile)
        lhs = value(p.src, x, params, profile)
        rhs = value(p.dst, x * (1 - c), params, profile)
        assert rhs == pytest.approx(lhs, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("pair", ADJACENT + ("UI",))
def test_costs_continuous_through_log_case(pair, table_params):
    at_one = cumulated_cost(pair, table_params, InvestorProfile(1.0, 10.0))
    for eps in (1e-8, 1e-6):
        for g in (1 - eps, 1 + eps):
            near = cumulated_cost(pair, table_params, InvestorProfile(g, 10.0))
            assert near == pytest.approx(at_one, abs=50 * eps)


def test_cost_near_log_case_matches_high_precision(table_params):
    """C^UM at gamma = 1 + 1e-7 against the raw exponents in 50-digit arithmetic."""
    mp.mp.dps = 50
    g, T = mp.mpf(1) + mp.mpf("1e-7"), mp.mpf(10)
    v0, th2 = mp.mpf(table_params.v0), mp.mpf(table_params.theta0) ** 2
    eps = 1 - g
    b, c = 2 / g - 1, eps / g
    disc = mp.sqrt(b * b - 4 * c)
    r1, r2 = (-b - disc) / 2, (-b + disc) / 2
    Q = (1 + v0 * T) ** (r2 - r1)
    phi_m = eps * (Q - 1) / (2 * g * v0 * (r2 * Q - r1))
    psi_m = (mp.log((r2 - r1) / (r2 * Q - r1)) + r2 * mp.log(1 + v0 * T)) / 2
    phi_u = eps * (g * T + eps * v0 * T * T) / (2 * g * g)
    ref = 1 - mp.exp(((phi_u - phi_m) * th2 - psi_m) / eps)
    got = cumulated_cost("UM", table_params, InvestorProfile(float(g), 10.0))
    assert got == pytest.approx(float(ref), rel=1e-10)


# ---------------------------------------------------------------------------
# Asymptotics
# ---------------------------------------------------------------------------


def test_taylor_examples():
    params = MarketParams(0.05, 0.202, 0.4, 0.0145)
    assert taylor_reference("cumulated", "RI", params, 2.0).linear == pytest.approx(0.003625, rel=1e-15)
    assert taylor_reference("annual", "RI", params, 1.0).constant == pytest.approx(1 - math.exp(-0.00725), rel=1e-15)
    assert round(pct(taylor_reference("annual", "RI", params, 1.0).constant), 2) == 0.72
    for g in (0.8, 1.0, 3.0):
        mr = taylor_reference("cumulated", "MR", params, g)
        assert mr.linear == 0.0 and mr.quadratic == 0.0
    with pytest.raises(UnsupportedLimit):
        taylor_reference("cumulated", "UR", params, 2.0)


@pytest.mark.parametrize("gamma", [0.8, 1.0, 2.0, 3.0, 6.0, 11.0])
@pytest.mark.parametrize("T", [1e-3, 1e-4])
def test_small_horizon_expansions(gamma, T, table_params):
    v0 = table_params.v0
    profile = InvestorProfile(gamma, T)
    um_ref = v0 * v0 * T * T / (4 * gamma)
    ri_ref = v0 * T / (2 * gamma)
    assert abs(cumulated_cost("UM", table_params, profile) - um_ref) / um_ref <= 0.05
    assert abs(cumulated_cost("RI", table_params, profile) - ri_ref) / ri_ref <= 0.05
    # second-order references are sharper still
    for pair in ("UM", "RI", "UI"):
        tay = taylor_reference("cumulated", pair, table_params, gamma)
        assert cumulated_cost(pair, table_params, profile) == pytest.approx(tay(T), rel=1e-3)
    c_mr = cumulated_cost("MR", table_params, InvestorProfile(gamma, 1e-3))
    c_um = cumulated_cost("UM", table_params, InvestorProfile(gamma, 1e-3))
    assert c_mr / 1e-6 <= 1e-3 * c_um / 1e-6


@pytest.mark.parametrize("gamma", [0.8, 1.0, 2.0, 3.0, 6.0, 11.0])
def test_annual_small_horizon(gamma, table_params):
    T = 1e-3
    profile = InvestorProfile(gamma, T)
    lim = limit_reference("annual", "RI", table_params, profile, "T->0")
    assert annual_cost("RI", table_params, profile) == pytest.approx(lim, rel=1e-2)
    for pair in ("UM", "RI", "UI"):
        tay = taylor_reference("annual", pair, table_params, gamma)
        assert annual_cost(pair, table_params, profile) == pytest.approx(tay(T), rel=1e-3)
    rep = cost_report("annual", table_params, profile)
    assert rep.approx_error == pytest.approx(annual_error_slope(table_params, gamma) * T, rel=5e-3)


def test_limit_examples(table_params):
    p4 = InvestorProfile(4.0, 10.0)
    assert limit_reference("cumulated", "RI", table_params, p4, "T->inf") == pytest.approx(0.133975, abs=1e-6)
    for pair in ("MR", "RI"):
        assert limit_reference("annual", pair, table_params, p4, "T->inf") == 0.0
    for kind in ("cumulated", "annual"):
        for pair in REPORT_PAIRS:
            assert limit_reference(kind, pair, table_params, p4, "gamma->inf") == 0.0
    with pytest.raises(UnsupportedLimit):
        limit_reference("cumulated", "RI", table_params, p4, "x->0")
    with pytest.raises(UnsupportedLimit):
        limit_reference("cumulated", "RI", table_params, InvestorProfile(0.8, 10.0), "T->inf")
    with pytest.raises(UnsupportedLimit):
        limit_reference("cumulated", "RI", table_params, p4, "T->Tbar")


def test_limits_are_approached_in_horizon(table_params):
    v0 = table_params.v0
    g4 = InvestorProfile(4.0, 1e5)
    assert abs(cumulated_cost("RI", table_params, g4) - (1 - math.sqrt(0.75))) <= 1e-3
    assert limit_reference("cumulated", "UM", table_params, g4, "T->inf") == 1.0
    assert cumulated_cost("UM", table_params, InvestorProfile(4.0, 1e4)) == pytest.approx(1.0, abs=1e-3)
    # C^MR creeps up to 1 only like a small power of T
    assert limit_reference("cumulated", "MR", table_params, g4, "T->inf") == 1.0
    horizons = (1e4, 1e8, 1e15, 1e30, 1e100)
    mr = [cumulated_cost("MR", table_params, InvestorProfile(4.0, T)) for T in horizons]
    assert all(a < b for a, b in zip(mr, mr[1:]))
    assert mr[-1] == pytest.approx(1.0, abs=1e-5)
    log_case = InvestorProfile(1.0, 1e6)
    assert limit_reference("annual", "UM", table_params, log_case, "T->inf") == pytest.approx(
        1 - math.exp(-v0 / 2), rel=1e-15
    )
    assert annual_cost("UM", table_params, log_case) == pytest.approx(1 - math.exp(-v0 / 2), rel=1e-3)
    assert limit_reference("cumulated", "MR", table_params, log_case, "T->inf") == 0.0
    assert cumulated_cost("UM", table_params, InvestorProfile(1.0, 1e4)) == pytest.approx(1.0, abs=1e-3)
    for pair in ("MR", "RI"):
        assert annual_cost(pair, table_params, InvestorProfile(4.0, 1e6)) < 1e-4


def test_limits_toward_large_risk_aversion(table_params):
    for T in (5.0, 10.0, 30.0):
        for kind in ("cumulated", "annual"):
            rep = cost_report(kind, table_params, InvestorProfile(1e6, T))
            assert max(rep.c_UM, rep.c_MR, rep.c_RI, rep.c_UI) < 1e-5


def test_limits_at_feasibility_boundary(table_params):
    # gamma small enough that T_bar (about 30 years) keeps C^UM visibly below 1
    g = 0.3
    t_bar = horizon_bound(g, table_params.v0)
    near = InvestorProfile(g, t_bar * (1 - 1e-10))
    for pair in ("MR", "RI"):
        assert limit_reference("cumulated", pair, table_params, near, "T->Tbar") == 1.0
        assert cumulated_cost(pair, table_params, near) > 0.99
    um_lim = limit_reference("cumulated", "UM", table_params, near, "T->Tbar")
    assert 0.0 < um_lim < 1.0
    assert cumulated_cost("UM", table_params, near) == pytest.approx(um_lim, abs=1e-6)
    T = 30.0
    near_g = InvestorProfile(gamma_bound(T, table_params.v0) * (1 + 1e-10), T)
    um_lim = limit_reference("annual", "UM", table_params, near_g, "gamma->gammabar")
    assert annual_cost("UM", table_params, near_g) == pytest.approx(um_lim, abs=1e-6)
    assert limit_reference("annual", "RI", table_params, near_g, "gamma->gammabar") == 1.0


# ---------------------------------------------------------------------------
# Monotonicity on grids
# ---------------------------------------------------------------------------

T_GRID = np.round(np.arange(0.1, 30.0001, 0.1), 10)


@pytest.mark.parametrize("gamma", [1.5, 3.0, 6.0, 11.0])
@pytest.mark.parametrize("params_name", ["table_params", "low_vol_params"])
def test_cumulated_costs_increase_with_horizon(gamma, params_name, request):
    params = request.getfixturevalue(params_name)
    for pair in ADJACENT:
        series = np.array([cumulated_cost(pair, params, InvestorProfile(gamma, float(T))) for T in T_GRID])
        assert np.all(np.diff(series) >= 0.0), pair


@pytest.mark.parametrize("gamma", [1.5, 3.0, 6.0, 11.0])
def test_annual_rational_cost_decreases_with_horizon(gamma, table_params):
    series = np.array([annual_cost("RI", table_params, InvestorProfile(gamma, float(T))) for T in T_GRID])
    assert np.all(np.diff(series) < 0.0)


@pytest.mark.parametrize("T", [1.0, 5.0, 10.0, 30.0])
def test_annual_rational_cost_decreases_with_risk_aversion(T, table_params):
    gammas = np.linspace(1.05, 12.0, 220)
    series = np.array([annual_cost("RI", table_params, InvestorProfile(float(g), T)) for g in gammas])
    assert np.all(np.diff(series) < 0.0)
