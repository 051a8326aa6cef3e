"""Asymptotically Schwarzschild metric family with an equatorial cutoff.

The ambient metric on ``R^3 \\ B_1(0)`` is ``ds^2 = delta_ij + T_ij`` in
cylindrical coordinates ``(x, r, theta)``.  The radial and axial components
carry the Schwarzschild-like tail ``2/l + 1/l**2`` (mass fixed at 1), while
the angular component is modulated by a cutoff profile ``phi`` of the cone
ratio ``s = r/|x|``: ``phi = 1`` near the symmetry axis (``s <= lam``) and
``phi = p`` near the equatorial plane (``s >= 2*lam``).

All functions accept scalars or numpy arrays and return exact closed-form
values and derivatives of the chosen profile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetricParams",
    "MetricDomainError",
    "ConfigError",
    "phi",
    "phi_prime",
    "phi_second",
    "metric_components",
    "chi",
    "chi_gradient",
    "cutoff_bound_measured",
    "schwarzschild_deviation",
]

CUTOFFS = ("quintic",)


class ConfigError(ValueError):
    """Invalid parameter set."""


class MetricDomainError(ValueError):
    """Point lies inside the excluded unit ball (l < 1)."""


@dataclass(frozen=True)
class MetricParams:
    """Ambient-metric configuration: cutoff scale ``lam``, target value ``p``.

    The cutoff transitions over ``s in [lam, 2*lam]`` via the quintic
    smoothstep, which is C^2, monotone, and satisfies
    ``lam*sup|phi'| + lam**2*sup|phi''| = (1.875 + 10/sqrt(3))*|p - 1|``.
    """

    lam: float = 0.1
    p: float = 20.0
    cutoff: str = "quintic"

    def __post_init__(self) -> None:
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise ConfigError(f"lam must be positive and finite, got {self.lam}")
        if not math.isfinite(self.p):
            raise ConfigError(f"p must be finite, got {self.p}")
        if self.cutoff not in CUTOFFS:
            raise ConfigError(f"unknown cutoff {self.cutoff!r}, expected one of {CUTOFFS}")


def _as_array(*xs):
    arrs = [np.asarray(x, dtype=float) for x in xs]
    scalar = all(a.ndim == 0 for a in arrs)
    return arrs, scalar


def _ret(a: np.ndarray, scalar: bool):
    return float(a) if scalar else a


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_d(t: np.ndarray) -> np.ndarray:
    return 30.0 * t * t * (1.0 - t) * (1.0 - t)


def _smoothstep_dd(t: np.ndarray) -> np.ndarray:
    return 60.0 * t * (2.0 * t - 1.0) * (t - 1.0)


def phi(s, params: MetricParams):
    """Cutoff profile: 1 on [0, lam], p on [2*lam, +inf] (inf encodes x = 0)."""
    (sa,), scalar = _as_array(s)
    lam, p = params.lam, params.p
    t = np.clip((sa - lam) / lam, 0.0, 1.0)
    out = 1.0 + (p - 1.0) * _smoothstep(t)
    out = np.where(sa >= 2.0 * lam, p, out)  # exact on the outer plateau, inf included
    return _ret(out, scalar)


def phi_prime(s, params: MetricParams):
    """Exact derivative of ``phi``; identically 0 outside (lam, 2*lam)."""
    (sa,), scalar = _as_array(s)
    lam, p = params.lam, params.p
    inside = (sa > lam) & (sa < 2.0 * lam)
    t = np.where(inside, (sa - lam) / lam, 0.0)
    out = np.where(inside, (p - 1.0) / lam * _smoothstep_d(t), 0.0)
    return _ret(out, scalar)


def phi_second(s, params: MetricParams):
    """Exact second derivative of ``phi``; identically 0 outside (lam, 2*lam)."""
    (sa,), scalar = _as_array(s)
    lam, p = params.lam, params.p
    inside = (sa > lam) & (sa < 2.0 * lam)
    t = np.where(inside, (sa - lam) / lam, 0.0)
    out = np.where(inside, (p - 1.0) / lam**2 * _smoothstep_dd(t), 0.0)
    return _ret(out, scalar)


def _cone_ratio(r: np.ndarray, x: np.ndarray) -> np.ndarray:
    # s = r/|x|, with x = 0 mapped to +inf (phi = p there).
    ax = np.abs(x)
    with np.errstate(divide="ignore"):
        return np.where(ax > 0.0, r / np.where(ax > 0.0, ax, 1.0), np.inf)


def _check_exterior(l: np.ndarray) -> None:
    if np.any(l < 1.0 - 1e-12):
        raise MetricDomainError(f"point inside unit ball: min l = {float(np.min(l))}")


def metric_components(r, x, params: MetricParams):
    """Return ``(T_rr, T_thetatheta, T_xx)`` at cylindrical ``(r, x)``, l >= 1."""
    (ra, xa), scalar = _as_array(r, x)
    l = np.hypot(ra, xa)
    _check_exterior(l)
    tail = 2.0 / l + 1.0 / l**2
    ph = phi(_cone_ratio(ra, xa), params)
    t_theta = ra**2 * (2.0 / l + ph / l**2)
    return _ret(tail, scalar), _ret(t_theta, scalar), _ret(tail, scalar)


def chi(r, x, params: MetricParams):
    """Angular distortion (1 + 2/l + phi/l^2) / (1 + 2/l + 1/l^2), l >= 1."""
    (ra, xa), scalar = _as_array(r, x)
    l = np.hypot(ra, xa)
    _check_exterior(l)
    ph = phi(_cone_ratio(ra, xa), params)
    num = 1.0 + 2.0 / l + ph / l**2
    den = 1.0 + 2.0 / l + 1.0 / l**2
    return _ret(num / den, scalar)


def chi_gradient(r, x, params: MetricParams):
    """Exact ``(d chi/dr, d chi/dx)``.

    The phi' contributions are assembled only where phi' != 0, so the
    1/x**2 factor is never evaluated on the plateaus (x = 0 included).
    """
    (ra, xa), scalar = _as_array(r, x)
    l = np.hypot(ra, xa)
    _check_exterior(l)
    s = _cone_ratio(ra, xa)
    ph = phi(s, params)
    num = 1.0 + 2.0 / l + ph / l**2
    den = 1.0 + 2.0 / l + 1.0 / l**2
    c = num / den

    dl_r = ra / l
    dl_x = xa / l
    dnum_r = (-2.0 / l**2 - 2.0 * ph / l**3) * dl_r
    dnum_x = (-2.0 / l**2 - 2.0 * ph / l**3) * dl_x
    dden_r = (-2.0 / l**2 - 2.0 / l**3) * dl_r
    dden_x = (-2.0 / l**2 - 2.0 / l**3) * dl_x

    inside = (s > params.lam) & (s < 2.0 * params.lam)
    if np.any(inside):
        php = phi_prime(s, params)
        ax = np.where(inside, np.abs(xa), 1.0)
        dnum_r = dnum_r + np.where(inside, php / (ax * l**2), 0.0)
        dnum_x = dnum_x - np.where(inside, np.sign(xa) * ra * php / (ax**2 * l**2), 0.0)

    dchi_r = (dnum_r - c * dden_r) / den
    dchi_x = (dnum_x - c * dden_x) / den
    return _ret(dchi_r, scalar), _ret(dchi_x, scalar)


def cutoff_bound_measured(params: MetricParams, n: int = 20001) -> float:
    """Measured ``lam*sup|phi'| + lam**2*sup|phi''|`` on a dense s-grid.

    For the quintic profile the exact value is (1.875 + 10/sqrt(3))*|p - 1|.
    """
    s = np.linspace(params.lam, 2.0 * params.lam, n)
    return float(
        params.lam * np.max(np.abs(phi_prime(s, params)))
        + params.lam**2 * np.max(np.abs(phi_second(s, params)))
    )


def schwarzschild_deviation(r, x, params: MetricParams):
    """``l^2 * max_ij |T_ij - (gS_ij - delta_ij)|`` against (1 + 1/(2l))^4 delta."""
    (ra, xa), scalar = _as_array(r, x)
    l = np.hypot(ra, xa)
    t_rr, t_theta, t_xx = metric_components(ra, xa, params)
    gs = (1.0 + 0.5 / l) ** 4 - 1.0
    dev = np.maximum(np.abs(t_rr - gs), np.abs(t_xx - gs))
    ra2 = ra * ra
    mask = ra2 > 0.0
    dev_theta = np.where(mask, np.abs(t_theta / np.where(mask, ra2, 1.0) - gs), 0.0)
    dev = np.maximum(dev, dev_theta)
    return _ret(l**2 * dev, scalar)
