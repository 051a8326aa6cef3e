from __future__ import annotations

import math

import numpy as np
import pytest

from cmc_shooter import MetricParams, OdeConfig, Terminal, integrate
from cmc_shooter.analysis import Case, classify
from cmc_shooter.shooting import (
    BracketInvalidError,
    InsufficientSamplesError,
    balance_details,
    even_extension_check,
    find_critical_a,
    pullback_sweep,
    singular_profile,
)


def test_critical_bracket_and_width(params, critical_by_h):
    for h_value, crit in critical_by_h.items():
        assert 0.95 < crit.a_crit < 1.05
        assert 2.0 * crit.bracket_width <= 1e-12
        lo, hi = crit.bracket
        lo_case = classify(integrate(OdeConfig(H=h_value, a=lo, y_max=6.0,
                                               stop_after_necks=2), params)).case
        hi_case = classify(integrate(OdeConfig(H=h_value, a=hi, y_max=6.0,
                                               stop_after_necks=2), params)).case
        assert lo_case is Case.H1
        assert hi_case is not Case.H1


def test_h1_endpoint_stable_under_tolerance_halving(params, critical_001):
    lo, _ = critical_001.bracket
    fine = OdeConfig(H=0.01, a=lo, abs_tol=5e-11, rel_tol=5e-11, y_max=6.0,
                     stop_after_necks=2)
    assert classify(integrate(fine, params)).case is Case.H1


def test_bracket_invalid_raises(params):
    with pytest.raises(BracketInvalidError):
        # both endpoints are deep in the two-neck set for tiny H
        find_critical_a(0.005, params, bracket=(0.95, 0.96))


def test_pullback_slope_growth(params, critical_001):
    rows = pullback_sweep(0.01, params, eps_list=(1e-6, 1e-8, 1e-10),
                          critical=critical_001)
    gp5 = [abs(r["gp_y5"]) for r in rows]
    gp1 = [abs(r["gp_y1"]) for r in rows]
    # |g'(y5)| ~ 1/(2 sqrt(eps)) grows without bound; |g'(y1)| stays bounded
    assert gp5[1] / gp5[0] > 5.0
    assert gp5[2] / gp5[1] > 5.0
    assert max(gp1) / min(gp1) < 1.05
    assert max(gp1) <= 1.0 / 0.01  # measured C/H with C < 1
    # tau at y5 tracks eps; g_floor and tau at the last sample tend to 0+
    for row in rows:
        assert 0.0 < row["tau_y5"] < 10.0 * row["eps_pullback"]
        assert 0.0 < row["tau_last"]
    assert rows[2]["g_floor"] < rows[1]["g_floor"] < rows[0]["g_floor"]
    assert rows[2]["tau_last"] < rows[1]["tau_last"] < rows[0]["tau_last"]


def test_min_slope_scaling_across_h(params, critical_by_h):
    # min(|g'(y1)|, |g'(y5)|) >= C/sqrt(H) with a stable measured constant
    consts = []
    for h_value, crit in critical_by_h.items():
        e1, e5 = crit.skeleton.require("y1", "y5")
        consts.append(min(abs(e1.gp), abs(e5.gp)) * math.sqrt(h_value))
    assert min(consts) > 0.2
    assert max(consts) / min(consts) < 1.6


def test_tau_at_inflections_positive_h2_scale(params, critical_by_h):
    # tau(y1), tau(y3) stay positive on the H^2 scale near criticality and
    # the slope relation g'(y_i) = -+ (1/(2 sqrt(tau)))(1 + O(tau)) holds
    for h_value, crit in critical_by_h.items():
        rows = pullback_sweep(h_value, params, eps_list=(1e-8,), critical=crit)
        row = rows[0]
        for key_t, key_s, sign in (("tau_y1", "gp_y1", -1.0), ("tau_y3", "gp_y3", +1.0)):
            tau = row[key_t]
            assert tau >= 0.25 * h_value**2
            predicted = sign / (2.0 * math.sqrt(tau))
            assert row[key_s] == pytest.approx(predicted, rel=10.0 * tau + 1e-6)


def test_singular_profile_convergence(params, critical_001):
    y5s = []
    floors = []
    for eps in (1e-6, 1e-8, 1e-10):
        profile, y5_star, g_floor = singular_profile(
            0.01, params, eps_pullback=eps, critical=critical_001)
        assert profile.terminal == Terminal.REACHED_YMAX
        y5s.append(y5_star)
        floors.append(g_floor)
    assert floors[0] > floors[1] > floors[2]
    assert floors[2] < 1e-9
    assert abs(y5s[0] - y5s[2]) < 1e-3
    assert abs(y5s[2] - 3.0) <= 3.0 * math.sqrt(0.01)


def test_y5_location_scaling(params, critical_by_h):
    for h_value, crit in critical_by_h.items():
        assert abs(crit.y5_star - 3.0) <= 1.0 * math.sqrt(h_value)
        e4 = crit.skeleton.y4
        assert abs(e4.y - 2.0) <= 1.0 * math.sqrt(h_value)


def test_even_extension_on_circle():
    orbit = integrate(OdeConfig(H=1.0, a=1.0, y_max=1.5, gp_blowup=1e4),
                      perturbed=False)
    rep = even_extension_check(orbit)
    assert rep.rho_limit == 0.0
    assert abs(rep.inv_ggp_limit) == pytest.approx(1.0, abs=1e-3)
    assert abs(rep.dy_dg_limit) < 1e-3
    assert rep.second_derivative_estimate == pytest.approx(-1.0, abs=5e-3)


def test_even_extension_near_critical(params, critical_001):
    rep = even_extension_check(critical_001.profile)
    expected = 1.0 + rep.rho_limit / 2.0
    assert abs(abs(rep.inv_ggp_limit) - abs(expected)) <= 1e-3
    assert abs(rep.dy_dg_limit) < 1e-3
    assert abs(rep.second_derivative_estimate + expected) < 5e-3
    assert all(math.isfinite(v) for v in
               (rep.dy_dg_limit, rep.inv_ggp_limit, rep.rho_limit,
                rep.second_derivative_estimate))


def test_even_extension_insufficient_samples(params):
    orbit = integrate(OdeConfig(H=0.01, a=0.96, y_max=2.5), params)
    with pytest.raises(InsufficientSamplesError):
        even_extension_check(orbit)


def test_balance_residual_signs_and_sign_change(params):
    res = balance_details(0.02, 0.1, p_bracket=(-10.0, 20.0), p_tol=2.0,
                          inner_width=1e-10)
    trace = dict(res.trace)
    assert trace[20.0] > 0.0
    assert trace[-10.0] < 0.0
    assert -10.0 < res.p < 20.0
    # at the near-balanced p both slopes exceed 1/sqrt(H)
    e1, e5 = res.critical.skeleton.require("y1", "y5")
    assert min(abs(e1.gp), abs(e5.gp)) > 1.0 / math.sqrt(0.02)


def test_balance_residual_continuity(params):
    # away from the balance point the residual moves slowly with p
    from cmc_shooter.shooting import _balance_residual

    r1, crit = _balance_residual(0.02, 0.1, 18.0, None, 1e-8, 1e-10, None)
    warm = (crit.a_crit - 2e-3, crit.a_crit + 2e-3)
    r2, _ = _balance_residual(0.02, 0.1, 18.2, None, 1e-8, 1e-10, warm)
    assert abs(r2 - r1) < 0.02 * abs(r1)
