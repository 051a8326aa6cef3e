"""Closed-form integral identities, verified by independent quadrature.

Three families: the translated-circle integrals behind the slope-balance
argument (values 0 and +-2/(3 y4^2)), the orbit-versus-circle comparison
integrals, and the scalar-flux slab integral of the cutoff perturbation,
whose closed form is 2 pi (1/beta - 1/alpha)(p - 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .analysis import EventSkeleton, MissingEventError
from .metric import MetricDomainError, MetricParams, phi_prime, phi_second
from .ode import Orbit

__all__ = [
    "IdentityReport",
    "OrbitIntegralComparison",
    "sphere_integrals",
    "sphere_half_integral",
    "orbit_integrals",
    "scalar_flux",
    "identity_suite",
]

_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-13, limit=300)


@dataclass(frozen=True)
class IdentityReport:
    name: str
    analytic: float
    numeric: float
    abs_error: float
    tolerance: float
    passed: bool

    @staticmethod
    def build(name: str, analytic: float, numeric: float,
              tolerance: float) -> "IdentityReport":
        err = abs(numeric - analytic)
        return IdentityReport(name, analytic, numeric, err, tolerance, err <= tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "analytic": self.analytic, "numeric": self.numeric,
            "abs_error": self.abs_error, "tolerance": self.tolerance, "pass": self.passed,
        }


def _circle_integrand(kind: str, y4: float):
    """theta-form integrand of the circle integrals, y = y4 + sin(theta).

    The substitution removes the h' endpoint blow-up: h h' dy becomes
    -sin(theta) cos(theta) d(theta).
    """

    def f(th: float) -> float:
        u = math.sin(th)
        h = math.cos(th)
        y = y4 + u
        d2 = y * y + h * h
        base = -u * h
        if kind == "A":
            return base / math.sqrt(d2)
        hp = -u / h
        return (h - y * hp) / (d2**1.5 * math.sqrt(1.0 + hp * hp)) * base

    return f


def _quad_theta(fn, lo: float, hi: float) -> float:
    """Adaptive quadrature with a log-graded split at the lower endpoint.

    When y4 is close to 1 the integrand develops a boundary layer of width
    ~(y4 - 1)^2 at theta = -pi/2; integrating the first 0.1 of the range in
    w with theta = lo + 10^w resolves layers down to 1e-16.
    """
    if lo > -0.5 * math.pi + 1e-15:
        return quad(fn, lo, hi, **_QUAD_OPTS)[0]
    split = min(lo + 0.1, hi)
    head = 0.0
    if split > lo:
        w_hi = math.log10(split - lo)
        head = quad(lambda w: fn(lo + 10.0**w) * math.log(10.0) * 10.0**w,
                    -16.0, w_hi, **_QUAD_OPTS)[0]
    tail = quad(fn, split, hi, **_QUAD_OPTS)[0] if hi > split else 0.0
    return head + tail


def sphere_half_integral(y4: float, kind: str, side: str) -> float:
    """Circle integral of kind 'A' or 'B' over the left or right half-arc."""
    lo, hi = (-0.5 * math.pi, 0.0) if side == "left" else (0.0, 0.5 * math.pi)
    return _quad_theta(_circle_integrand(kind, y4), lo, hi)


def sphere_integrals(y4: float) -> tuple[float, float, float]:
    """(I0, I1, I2) over [y4 - 1, y4 + 1] for the translated unit circle.

    Closed forms for y4 > 1: I1 = 2/(3 y4^2), I2 = -I1, I0 = I1 + I2 = 0.
    """
    if not y4 > 1.0:
        raise ValueError(f"need y4 > 1, got {y4}")
    i1 = _quad_theta(_circle_integrand("A", y4), -0.5 * math.pi, 0.5 * math.pi)
    i2 = _quad_theta(_circle_integrand("B", y4), -0.5 * math.pi, 0.5 * math.pi)
    return i1 + i2, i1, i2


@dataclass(frozen=True)
class OrbitIntegralComparison:
    """Orbit-segment integrals against their circle counterparts."""

    a_34: float
    a_34_sphere: float
    b_34: float
    b_34_sphere: float
    a_45: float
    a_45_sphere: float
    b_45: float
    b_45_sphere: float
    combined_weighted: float

    @property
    def diffs(self) -> dict[str, float]:
        return {
            "A_y3_y4": abs(self.a_34 - self.a_34_sphere),
            "B_y3_y4": abs(self.b_34 - self.b_34_sphere),
            "A_y4_y5": abs(self.a_45 - self.a_45_sphere),
            "B_y4_y5": abs(self.b_45 - self.b_45_sphere),
        }

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "a_34", "a_34_sphere", "b_34", "b_34_sphere",
            "a_45", "a_45_sphere", "b_45", "b_45_sphere", "combined_weighted")}
        out["diffs"] = self.diffs
        return out


def _fn_a(y, g, gp):
    return g * gp / np.sqrt(y * y + g * g)


def _fn_b(y, g, gp):
    d2 = y * y + g * g
    return (g - y * gp) / (d2**1.5 * np.sqrt(1.0 + gp * gp)) * g * gp


def orbit_integrals(orbit: Orbit, skeleton: EventSkeleton) -> OrbitIntegralComparison:
    """Compare the two weight integrals on [y3, y4] and [y4, y5] with the
    corresponding half-circle integrals, and evaluate the combined H-weighted
    integrand over [y3, y5] (expected O(H^2))."""
    e3, e4, e5 = skeleton.require("y3", "y4", "y5")
    y3, y4 = e3.y, e4.y
    y5 = min(e5.y, orbit.y_stop)
    H = orbit.config.H

    def combined(y, g, gp):
        d2 = y * y + g * g
        return (H / np.sqrt(d2)
                + H * (g - y * gp) / (d2**1.5 * np.sqrt(1.0 + gp * gp))) * g * gp

    return OrbitIntegralComparison(
        a_34=orbit.quad(_fn_a, y3, y4),
        a_34_sphere=sphere_half_integral(y4, "A", "left"),
        b_34=orbit.quad(_fn_b, y3, y4),
        b_34_sphere=sphere_half_integral(y4, "B", "left"),
        a_45=orbit.quad(_fn_a, y4, y5),
        a_45_sphere=sphere_half_integral(y4, "A", "right"),
        b_45=orbit.quad(_fn_b, y4, y5),
        b_45_sphere=sphere_half_integral(y4, "B", "right"),
        combined_weighted=orbit.quad(combined, y3, y5),
    )


def scalar_flux(alpha: float, beta: float, params: MetricParams) -> float:
    """Slab integral of S_ij,ij - S_ii,jj for S = ds^2 - (1 + 1/l)^2 delta.

    Reduced integrand -(2 x phi'(r/x)/r + phi''(r/x))/x^4 in cylindrical
    coordinates over alpha <= x <= beta (x > 0); the phi support confines
    the r-integral to [lam x, 2 lam x].  Closed form:
    2 pi (1/beta - 1/alpha)(p - 1).
    """
    if not (1.0 <= alpha < beta):
        raise MetricDomainError(f"need 1 <= alpha < beta, got ({alpha}, {beta})")
    lam = params.lam

    def inner(x: float) -> float:
        def f_r(r: float) -> float:
            s = r / x
            return -(2.0 * x * phi_prime(s, params) + r * phi_second(s, params)) / x**4

        return quad(f_r, lam * x, 2.0 * lam * x, epsabs=1e-13, epsrel=1e-12)[0]

    val = quad(inner, alpha, beta, epsabs=1e-12, epsrel=1e-11, limit=200)[0]
    return 2.0 * math.pi * val


def identity_suite(params: MetricParams | None = None) -> list[IdentityReport]:
    """Reports for the closed-form identities at their verification tolerances."""
    lam = params.lam if params is not None else 0.1
    reports: list[IdentityReport] = []
    for y4 in (1.5, 2.0, 3.0, 10.0):
        i0, i1, i2 = sphere_integrals(y4)
        exact = 2.0 / (3.0 * y4 * y4)
        reports.append(IdentityReport.build(f"circle_I0[y4={y4}]", 0.0, i0, 1e-10))
        reports.append(IdentityReport.build(f"circle_I1[y4={y4}]", exact, i1, 1e-10))
        reports.append(IdentityReport.build(f"circle_I2[y4={y4}]", -exact, i2, 1e-10))
    for alpha, beta, p in ((1.0, 2.0, 4.0), (1.0, 2.0, 20.0), (2.0, 4.0, -10.0)):
        prm = MetricParams(lam=lam, p=p)
        numeric = scalar_flux(alpha, beta, prm)
        exact = 2.0 * math.pi * (1.0 / beta - 1.0 / alpha) * (p - 1.0)
        reports.append(IdentityReport.build(
            f"scalar_flux[a={alpha},b={beta},p={p}]", exact, numeric,
            1e-8 * abs(exact)))
    return reports
