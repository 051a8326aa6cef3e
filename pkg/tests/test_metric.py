from __future__ import annotations

import math

import numpy as np
import pytest

from cmc_shooter.metric import (
    ConfigError,
    MetricDomainError,
    MetricParams,
    chi,
    chi_gradient,
    cutoff_bound_measured,
    metric_components,
    phi,
    phi_prime,
    phi_second,
    schwarzschild_deviation,
)


def test_phi_plateaus():
    prm = MetricParams(lam=0.1, p=20.0)
    assert phi(0.05, prm) == 1.0  # s = 0.5*lam
    assert phi(0.3, prm) == 20.0  # s = 3*lam
    assert phi(math.inf, prm) == 20.0
    assert phi_prime(0.05, prm) == 0.0
    assert phi_prime(0.3, prm) == 0.0
    assert phi_prime(math.inf, prm) == 0.0


def test_phi_constant_when_p_is_one():
    prm = MetricParams(lam=0.2, p=1.0)
    s = np.linspace(0.0, 1.0, 501)
    assert np.all(phi(s, prm) == 1.0)
    assert np.all(phi_prime(s, prm) == 0.0)


def test_phi_monotone_and_c2():
    prm = MetricParams(lam=0.1, p=20.0)
    s = np.linspace(0.05, 0.35, 4001)
    dphi = np.diff(phi(s, prm))
    assert np.all(dphi >= 0.0)
    # C^2 junctions: phi'' tends to its plateau value 0 linearly at lam, 2*lam
    slope = 60.0 * abs(prm.p - 1.0) / prm.lam**3
    for s0 in (0.1, 0.2):
        for h in (1e-6, 1e-8):
            assert abs(phi_prime(s0 + h, prm)) <= slope * h * h
            assert abs(phi_second(s0 + h, prm)) <= 1.1 * slope * h
            assert abs(phi_second(s0 - h, prm)) <= 1.1 * slope * h
    # interior: finite differences of phi' reproduce phi''
    h = 1e-6
    for s0 in (0.13, 0.15, 0.18):
        fd = (phi_prime(s0 + h, prm) - phi_prime(s0 - h, prm)) / (2 * h)
        assert fd == pytest.approx(phi_second(s0, prm), rel=1e-5, abs=1e-6)


@pytest.mark.parametrize("p", [-10.0, 1.0, 20.0])
def test_cutoff_bound(p):
    prm = MetricParams(lam=0.1, p=p)
    measured = cutoff_bound_measured(prm)
    assert measured <= 8.0 * abs(p - 1.0) + 1e-12
    # quintic profile: sup|S'| = 1.875, sup|S''| = 10/sqrt(3)
    exact = (1.875 + 10.0 / math.sqrt(3.0)) * abs(p - 1.0)
    assert measured == pytest.approx(exact, rel=1e-6, abs=1e-12)


def test_metric_components_on_axis_plane():
    prm = MetricParams(lam=0.1, p=7.0)
    t_rr, t_theta, t_xx = metric_components(1.0, 0.0, prm)
    assert t_rr == pytest.approx(3.0)
    assert t_xx == pytest.approx(3.0)
    assert t_theta == pytest.approx(2.0 + 7.0)  # r^2 (2/l + p/l^2) at r=l=1


def test_metric_components_arithmetic():
    prm = MetricParams(lam=0.1, p=1.0)
    t_rr, t_theta, t_xx = metric_components(3.0, 4.0, prm)
    assert t_rr == pytest.approx(0.44)
    assert t_xx == pytest.approx(0.44)
    assert t_theta == pytest.approx(9.0 * 0.44)


def test_p1_metric_is_conformal():
    # 2/l + 1/l^2 = (1+1/l)^2 - 1, so p=1 gives (1+1/l)^2 * euclidean
    prm = MetricParams(lam=0.3, p=1.0)
    rng = np.random.default_rng(7)
    r = rng.uniform(0.5, 10.0, 200)
    x = rng.uniform(-10.0, 10.0, 200)
    keep = np.hypot(r, x) >= 1.0
    r, x = r[keep], x[keep]
    l = np.hypot(r, x)
    t_rr, t_theta, t_xx = metric_components(r, x, prm)
    conf = (1.0 + 1.0 / l) ** 2 - 1.0
    assert np.allclose(t_rr, conf, rtol=1e-14)
    assert np.allclose(t_theta, r**2 * conf, rtol=1e-14)


def test_domain_error_inside_unit_ball():
    prm = MetricParams()
    with pytest.raises(MetricDomainError):
        metric_components(0.3, 0.4, prm)
    with pytest.raises(MetricDomainError):
        chi(0.1, 0.2, prm)


def test_chi_values():
    prm = MetricParams(lam=0.1, p=5.0)
    assert chi(1.0, 0.0, prm) == pytest.approx(2.0)  # (1+2+5)/(1+2+1)
    assert chi(2.0, 3.0, MetricParams(lam=0.1, p=1.0)) == pytest.approx(1.0)
    # phi = 1 region: s = r/|x| <= lam
    assert chi(0.15, 2.0, prm) == pytest.approx(1.0)


def test_chi_identity():
    # r^2 + T_thetatheta = r^2 * chi * (1 + T_rr) to relative 1e-14
    prm = MetricParams(lam=0.1, p=20.0)
    rng = np.random.default_rng(3)
    r = rng.uniform(0.2, 20.0, 500)
    x = rng.uniform(-20.0, 20.0, 500)
    keep = np.hypot(r, x) >= 1.0
    r, x = r[keep], x[keep]
    t_rr, t_theta, _ = metric_components(r, x, prm)
    lhs = r**2 + t_theta
    rhs = r**2 * chi(r, x, prm) * (1.0 + t_rr)
    assert np.max(np.abs(lhs - rhs) / np.abs(lhs)) <= 1e-14


def test_chi_gradient_matches_finite_differences():
    prm = MetricParams(lam=0.1, p=20.0)
    pts = [(1.5, 2.0), (0.3, 2.0), (2.0, 0.0), (0.25, -1.7), (5.0, 1.0)]
    h = 1e-6
    for r, x in pts:
        dr, dx = chi_gradient(r, x, prm)
        fd_r = (chi(r + h, x, prm) - chi(r - h, x, prm)) / (2 * h)
        fd_x = (chi(r, x + h, prm) - chi(r, x - h, prm)) / (2 * h)
        assert dr == pytest.approx(fd_r, rel=2e-8, abs=2e-9)
        assert dx == pytest.approx(fd_x, rel=2e-8, abs=2e-9)


def test_asymptotically_schwarzschild():
    # l^2 |T_ij - (gS_ij - delta_ij)| stays bounded on a log-spaced grid
    prm = MetricParams(lam=0.1, p=20.0)
    l = np.logspace(0.0, 6.0, 60)
    for frac in (0.0, 0.3, 0.9, 1.0):
        r = l * math.sqrt(1.0 - frac**2)
        x = l * frac
        dev = schwarzschild_deviation(r, x, prm)
        assert np.all(np.isfinite(dev))
        assert np.max(dev) <= abs(prm.p) + 3.0


def test_params_validation():
    with pytest.raises(ConfigError):
        MetricParams(lam=-1.0)
    with pytest.raises(ConfigError):
        MetricParams(cutoff="heaviside")
