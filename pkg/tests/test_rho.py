"""The exact perturbation term against a 50-digit straight-line transcription.

The oracle below re-transcribes the three-line closed form independently in
mpmath; the FROZEN constants were produced by it at mp.dps = 50 and the
package value must match them to float precision.
"""
from __future__ import annotations

import mpmath as mp
import numpy as np
import pytest

from cmc_shooter import MetricParams, OdeConfig, State, integrate
from cmc_shooter.ode import (
    OdeDomainError,
    rho_at_pole,
    rho_exact,
    rho_exact_grid,
    rho_expanded,
    rho_expanded_grid,
)


def _phi_mp(s, lam, p):
    if s >= 2 * lam:
        return mp.mpf(p)
    if s <= lam:
        return mp.mpf(1)
    t = (s - lam) / lam
    return 1 + (p - 1) * (6 * t**5 - 15 * t**4 + 10 * t**3)


def _phi_prime_mp(s, lam, p):
    if s >= 2 * lam or s <= lam:
        return mp.mpf(0)
    t = (s - lam) / lam
    return (p - 1) * (30 * t**4 - 60 * t**3 + 30 * t**2) / lam


def rho_oracle(y, g, gp, H, lam, p):
    """Straight-line transcription of the closed form at 50 digits."""
    with mp.workdps(50):
        y, g, gp, H, lam, p = (mp.mpf(v) for v in (y, g, gp, H, lam, p))
        d = mp.sqrt(y**2 + g**2)
        w = mp.sqrt(1 + gp**2)
        s = mp.inf if y == 0 else abs(g / y)
        ph = _phi_mp(s, lam, p)
        php = _phi_prime_mp(s, lam, p)
        g1 = H / d + H**2 / (4 * d**2)
        big_n = 1 + H / d + ph * H**2 / (4 * d**2)
        out = H / d
        out += (H / 2 + H**2 / (4 * d)) * (g - y * gp) / (d**3 * (1 + g1) * w)
        out += (H / 2 + H**2 * ph / (4 * d)) * (g - y * gp) / (d**3 * big_n * w)
        if php != 0:
            out -= (H**2 / (8 * d**2)) * (php / big_n) * (y + g * gp) / (y**2 * w)
        return out


# (y, g, gp, H, lam, p) -> oracle value at 50 digits
FROZEN = [
    ((0.0, 1.0, 0.0, 0.01, 0.1, 20.0), "0.0204179744523301360001864867119"),
    ((1.0, 0.15, -2.0, 0.01, 0.1, 20.0), "0.0180085654179111420080630151491"),
    ((2.0, 0.97, -0.3, 0.02, 0.1, 20.0), "0.0118392356564350058598360700635"),
    ((1.2, 0.11, 1.5, 0.005, 0.1, -10.0), "0.00147613987495020931366713298059"),
    ((3.0, 0.05, -30.0, 0.01, 0.1, 20.0), "0.00444167120223950866247163009527"),
]


@pytest.mark.parametrize("point,expected", FROZEN)
def test_rho_exact_matches_frozen_oracle(point, expected):
    y, g, gp, H, lam, p = point
    value = rho_exact(State(y, g, gp), H, MetricParams(lam=lam, p=p))
    assert value == pytest.approx(float(expected), rel=5e-15)


@pytest.mark.parametrize("point,expected", FROZEN)
def test_frozen_values_regenerate(point, expected):
    live = rho_oracle(*point)
    with mp.workdps(40):
        assert mp.almosteq(live, mp.mpf(expected), rel_eps=mp.mpf("1e-28"))


def test_rho_vanishes_at_h_zero():
    st = State(0.7, 0.8, -1.1)
    assert rho_exact(st, 0.0, MetricParams()) == 0.0
    assert rho_expanded(st, 0.0, MetricParams()) == 0.0


def test_rho_domain():
    with pytest.raises(OdeDomainError):
        rho_exact(State(1.0, 0.0, 0.0), 0.01, MetricParams())


def test_rho_bounded_by_h(params, reference_orbit):
    # |rho| <= C*H with the measured constant stable as H halves
    orb = reference_orbit
    consts = []
    for h_value in (0.02, 0.01, 0.005):
        r = rho_exact_grid(orb.y, orb.g, orb.gp, h_value, params)
        consts.append(float(np.max(np.abs(r))) / h_value)
    assert max(consts) < 5.0
    assert max(consts) / min(consts) < 1.2


def test_expanded_drops_phi_terms_at_p_one():
    # at p=1 the quadratic coefficient is (1-3)/4 = -1/2 and phi' drops out
    prm = MetricParams(lam=0.1, p=1.0)
    y, g, gp, h_value = 0.9, 0.6, -1.3, 0.01
    d = np.hypot(y, g)
    w = np.sqrt(1.0 + gp * gp)
    v = (g - y * gp) / w
    manual = h_value / d + h_value * v / d**3 - 0.5 * h_value**2 * v / d**4
    assert rho_expanded(State(y, g, gp), h_value, prm) == pytest.approx(manual, rel=1e-14)


def test_expansion_truncation_scales_cubically(params, reference_orbit):
    orb = reference_orbit
    diffs = []
    for h_value in (0.02, 0.01, 0.005):
        exact = rho_exact_grid(orb.y, orb.g, orb.gp, h_value, params)
        expanded = rho_expanded_grid(orb.y, orb.g, orb.gp, h_value, params)
        diffs.append(float(np.max(np.abs(exact - expanded))))
    assert diffs[0] / diffs[1] == pytest.approx(8.0, rel=0.15)
    assert diffs[1] / diffs[2] == pytest.approx(8.0, rel=0.15)


def test_rho_at_pole_limit(params):
    # substituting d -> y5 and (g - y g')/w -> y5 reproduces the orbit value
    h_value = 0.01
    y5 = 3.0
    limit = rho_at_pole(y5, h_value, params)
    # emulate the pole state: g -> 0 along the steep branch, s = g/|y| -> 0
    st = State(y=y5, g=1e-9, gp=-1e9)
    assert rho_exact(st, h_value, params) == pytest.approx(limit, rel=1e-6)
