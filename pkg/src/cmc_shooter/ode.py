"""Rescaled meridian ODE and its adaptive integrator.

The orbit g(y) solves ``g'' - (1/g)(1 + g'^2) + (2 + rho)(1 + g'^2)^{3/2} = 0``
from ``g(0) = a, g'(0) = 0``, where ``rho`` encodes the ambient-metric
perturbation (``rho = 0`` gives the Delaunay equation).  The integrator is an
embedded Dormand-Prince 4(5) pair with PI step control and cubic-Hermite
dense output.  Near steep slopes it switches to the radius ``g`` as the
independent variable, declares blow-up past a slope threshold, and localizes
every sign change of ``g'`` and of the inflection function
``F = 1 - (2 + rho) * g * sqrt(1 + g'^2)`` by bracketed root refinement.
"""
from __future__ import annotations

import bisect as _bisect
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterator

import numpy as np
from scipy.optimize import brentq

from .metric import ConfigError, MetricParams, phi, phi_prime

__all__ = [
    "State",
    "OdeConfig",
    "Event",
    "Orbit",
    "Terminal",
    "OdeDomainError",
    "tau_of",
    "k_of",
    "rho_exact",
    "rho_exact_grid",
    "rho_expanded",
    "rho_expanded_grid",
    "rho_at_pole",
    "rhs",
    "delaunay_rhs",
    "integrate",
    "tau_drift_residual",
]


class OdeDomainError(ValueError):
    """State left the admissible region (g <= 0 or d = 0) without blow-up."""


class Terminal(str, Enum):
    REACHED_YMAX = "reached_ymax"
    BLOWUP_DETECTED = "blowup_detected"
    STEP_FAILURE = "step_failure"


def tau_of(g: float, gp: float) -> float:
    """Delaunay parameter tau = -g^2 + g/sqrt(1 + gp^2)."""
    return -g * g + g / math.sqrt(1.0 + gp * gp)


def k_of(g: float, gp: float) -> float:
    """Neck invariant k = g*sqrt(1 + gp^2); inflection locus is k = 1/(2+rho)."""
    return g * math.sqrt(1.0 + gp * gp)


@dataclass(frozen=True)
class State:
    """One phase-space point of the rescaled orbit."""

    y: float
    g: float
    gp: float

    @property
    def d(self) -> float:
        return math.hypot(self.y, self.g)

    @property
    def k(self) -> float:
        return k_of(self.g, self.gp)

    @property
    def tau(self) -> float:
        return tau_of(self.g, self.gp)


@dataclass(frozen=True)
class OdeConfig:
    """Integration configuration.

    ``stop_after_necks`` ends the run as soon as that many slope zeros with
    g in (0, 1/2) have been localized (the run then terminates with
    ``REACHED_YMAX`` at the event); shooting searches use it to avoid
    integrating past classification.
    """

    H: float
    a: float
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    gp_switch: float = 10.0
    gp_blowup: float = 1e6
    y_max: float = 20.0
    stop_after_necks: int | None = None

    def __post_init__(self) -> None:
        if not (self.H > 0.0 and math.isfinite(self.H)):
            raise ConfigError(f"H must be positive, got {self.H}")
        if not (0.8 <= self.a <= 1.2):
            raise ConfigError(f"a must lie in [0.8, 1.2], got {self.a}")
        for name in ("abs_tol", "rel_tol"):
            v = getattr(self, name)
            if not (0.0 < v <= 1e-4):
                raise ConfigError(f"{name} must lie in (0, 1e-4], got {v}")
        if not (0.0 < self.gp_switch < self.gp_blowup):
            raise ConfigError("need 0 < gp_switch < gp_blowup")
        if not (self.y_max > 0.0):
            raise ConfigError(f"y_max must be positive, got {self.y_max}")


@dataclass(frozen=True)
class Event:
    """Localized orbit event: 'gp_zero', 'gpp_zero' or 'blowup'."""

    kind: str
    y: float
    g: float
    gp: float

    def to_dict(self) -> dict:
        return {"kind": self.kind, "y": self.y, "g": self.g, "gp": self.gp}


# ---------------------------------------------------------------------------
# rho: the metric perturbation of the rescaled equation
# ---------------------------------------------------------------------------

def _make_rho(H: float, lam: float, p: float) -> Callable[[float, float, float], float]:
    """Scalar fast path for the exact rho; phi evaluated at s = |g/y|."""
    two_lam = 2.0 * lam
    dphi_c = 30.0 * (p - 1.0) / lam

    def rho(y: float, g: float, gp: float) -> float:
        d2 = y * y + g * g
        d = math.sqrt(d2)
        w = math.sqrt(1.0 + gp * gp)
        ay = abs(y)
        if g >= two_lam * ay:  # covers y = 0 (s = +inf)
            ph, php = p, 0.0
        elif g <= lam * ay:
            ph, php = 1.0, 0.0
        else:
            t = (g / ay - lam) / lam
            ph = 1.0 + (p - 1.0) * t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
            php = dphi_c * t * t * (1.0 - t) * (1.0 - t)
        hd = H / d
        q = 0.25 * H * H / d2
        one_g1 = 1.0 + hd + q
        nch = 1.0 + hd + ph * q
        u = (g - y * gp) / (d2 * d * w)
        out = hd + (0.5 * H + 0.25 * H * H / d) * u / one_g1
        out += (0.5 * H + 0.25 * H * H * ph / d) * u / nch
        if php != 0.0:
            out -= 0.125 * H * H * php * (y + g * gp) / (d2 * nch * y * y * w)
        return out

    return rho


def rho_exact(state: State, H: float, params: MetricParams) -> float:
    """Exact perturbation term, evaluated term by term.

    The phi' contribution is exactly 0 wherever phi'(|g/y|) = 0, so the
    1/y^2 factor is never touched on the plateaus (y = 0 included).
    """
    if state.g <= 0.0 or (state.y == 0.0 and state.g == 0.0):
        raise OdeDomainError(f"rho undefined at g={state.g}, y={state.y}")
    if H == 0.0:
        return 0.0
    return _make_rho(H, params.lam, params.p)(state.y, state.g, state.gp)


def rho_exact_grid(y, g, gp, H: float, params: MetricParams):
    """Vectorized ``rho_exact`` over numpy arrays."""
    y = np.asarray(y, dtype=float)
    g = np.asarray(g, dtype=float)
    gp = np.asarray(gp, dtype=float)
    d2 = y * y + g * g
    d = np.sqrt(d2)
    w = np.sqrt(1.0 + gp * gp)
    ay = np.abs(y)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(ay > 0.0, g / np.where(ay > 0.0, ay, 1.0), np.inf)
    ph = phi(s, params)
    php = phi_prime(s, params)
    hd = H / d
    q = 0.25 * H * H / d2
    one_g1 = 1.0 + hd + q
    nch = 1.0 + hd + ph * q
    u = (g - y * gp) / (d2 * d * w)
    out = hd + (0.5 * H + 0.25 * H * H / d) * u / one_g1
    out = out + (0.5 * H + 0.25 * H * H * ph / d) * u / nch
    mask = php != 0.0
    if np.any(mask):
        y2 = np.where(mask, y * y, 1.0)
        out = out - np.where(mask, 0.125 * H * H * php * (y + g * gp) / (d2 * nch * y2 * w), 0.0)
    return out


def rho_expanded(state: State, H: float, params: MetricParams) -> float:
    """H-expansion of rho through the quadratic terms (cubic remainder dropped)."""
    return float(rho_expanded_grid(state.y, state.g, state.gp, H, params))


def rho_expanded_grid(y, g, gp, H: float, params: MetricParams):
    y = np.asarray(y, dtype=float)
    g = np.asarray(g, dtype=float)
    gp = np.asarray(gp, dtype=float)
    d2 = y * y + g * g
    d = np.sqrt(d2)
    w = np.sqrt(1.0 + gp * gp)
    ay = np.abs(y)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(ay > 0.0, g / np.where(ay > 0.0, ay, 1.0), np.inf)
    ph = phi(s, params)
    php = phi_prime(s, params)
    v = (g - y * gp) / w
    out = H / d + H * v / (d2 * d) + 0.25 * H * H * (ph - 3.0) * v / (d2 * d2)
    mask = php != 0.0
    if np.any(mask):
        y2 = np.where(mask, y * y, 1.0)
        out = out - np.where(mask, 0.125 * H * H * php * (y + g * gp) / (d2 * y2 * w), 0.0)
    return out


def rho_at_pole(y5: float, H: float, params: MetricParams) -> float:
    """Limit of rho at the closing pole: d -> y5 and (g - y g')/w -> y5.

    On the axis the cone ratio tends to 0, so phi -> 1 and the phi' term
    drops out.
    """
    if y5 <= 0.0:
        raise OdeDomainError(f"pole location must be positive, got {y5}")
    g1 = H / y5 + 0.25 * H * H / (y5 * y5)
    return H / y5 + 2.0 * (0.5 * H + 0.25 * H * H / y5) / (y5 * y5 * (1.0 + g1))


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------

def rhs(state: State, H: float, params: MetricParams) -> tuple[float, float]:
    """Perturbed system: (dg/dy, dgp/dy)."""
    if state.g <= 0.0:
        raise OdeDomainError(f"rhs needs g > 0, got g={state.g}")
    w2 = 1.0 + state.gp * state.gp
    r = rho_exact(state, H, params)
    return state.gp, w2 / state.g - (2.0 + r) * w2 * math.sqrt(w2)


def delaunay_rhs(state: State) -> tuple[float, float]:
    """Unperturbed system (rho = 0)."""
    if state.g <= 0.0:
        raise OdeDomainError(f"rhs needs g > 0, got g={state.g}")
    w2 = 1.0 + state.gp * state.gp
    return state.gp, w2 / state.g - 2.0 * w2 * math.sqrt(w2)


def _make_gpp(H: float, params: MetricParams | None, perturbed: bool):
    if perturbed:
        rho = _make_rho(H, params.lam, params.p)

        def gpp(y: float, g: float, gp: float) -> float:
            if g <= 0.0:
                return math.nan
            w2 = 1.0 + gp * gp
            return w2 / g - (2.0 + rho(y, g, gp)) * w2 * math.sqrt(w2)

    else:

        def gpp(y: float, g: float, gp: float) -> float:
            if g <= 0.0:
                return math.nan
            w2 = 1.0 + gp * gp
            return w2 / g - 2.0 * w2 * math.sqrt(w2)

    return gpp


# ---------------------------------------------------------------------------
# Dense output
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Segment:
    """Cubic-Hermite dense output for one accepted step.

    ``chart`` is 'y' (t = y, u = (g, gp)) or 'g' (t = g, u = (y, gp)).
    """

    chart: str
    t0: float
    t1: float
    u0: tuple[float, float]
    u1: tuple[float, float]
    f0: tuple[float, float]
    f1: tuple[float, float]

    def eval(self, t: float) -> tuple[float, float]:
        h = self.t1 - self.t0
        th = (t - self.t0) / h
        h00 = (1.0 + 2.0 * th) * (1.0 - th) ** 2
        h10 = th * (1.0 - th) ** 2
        h01 = th * th * (3.0 - 2.0 * th)
        h11 = th * th * (th - 1.0)
        a = h00 * self.u0[0] + h * h10 * self.f0[0] + h01 * self.u1[0] + h * h11 * self.f1[0]
        b = h00 * self.u0[1] + h * h10 * self.f0[1] + h01 * self.u1[1] + h * h11 * self.f1[1]
        return a, b

    def state(self, t: float) -> State:
        a, b = self.eval(t)
        if self.chart == "y":
            return State(y=t, g=a, gp=b)
        return State(y=a, g=t, gp=b)

    @property
    def y_lo(self) -> float:
        return self.t0 if self.chart == "y" else self.u0[0]

    @property
    def y_hi(self) -> float:
        return self.t1 if self.chart == "y" else self.u1[0]

    def t_at_y(self, y: float) -> float:
        if self.chart == "y":
            return y
        if self.t0 == self.t1:
            return self.t0
        return brentq(lambda t: self.eval(t)[0] - y, *sorted((self.t0, self.t1)), xtol=1e-14)


_GL_NODES = np.array([
    -0.9061798459386640, -0.5384693101056831, 0.0,
    0.5384693101056831, 0.9061798459386640,
])
_GL_WEIGHTS = np.array([
    0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
    0.4786286704993665, 0.2369268850561891,
])


# ---------------------------------------------------------------------------
# Orbit
# ---------------------------------------------------------------------------

class Orbit:
    """Densely sampled trajectory with localized events.

    Sample columns are exposed as numpy arrays (``y, g, gp, tau, rho, k, d``),
    one row per accepted integrator step.  ``events`` is ordered along the
    orbit.  Immutable after construction; safe to share between threads.
    """

    def __init__(self, *, config: OdeConfig, params: MetricParams | None,
                 perturbed: bool, samples: list[tuple[float, float, float]],
                 segments: list[_Segment], events: list[Event], terminal: Terminal,
                 blowup_y: float | None = None, blowup_g: float | None = None) -> None:
        self.config = config
        self.params = params
        self.perturbed = perturbed
        arr = np.array(samples, dtype=float).reshape(-1, 3)
        self.y = arr[:, 0]
        self.g = arr[:, 1]
        self.gp = arr[:, 2]
        self.d = np.hypot(self.y, self.g)
        w = np.sqrt(1.0 + self.gp**2)
        self.k = self.g * w
        self.tau = -self.g**2 + self.g / w
        if perturbed:
            self.rho = rho_exact_grid(self.y, self.g, self.gp, config.H, params)
        else:
            self.rho = np.zeros_like(self.y)
        self.segments = segments
        self.events = events
        self.terminal = terminal
        self.blowup_y = blowup_y
        self.blowup_g = blowup_g
        self._seg_ylo = [s.y_lo for s in segments]

    # -- basic queries ------------------------------------------------------

    @property
    def y_stop(self) -> float:
        return float(self.y[-1])

    @property
    def terminal_state(self) -> State:
        return State(y=float(self.y[-1]), g=float(self.g[-1]), gp=float(self.gp[-1]))

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def state_at(self, y: float) -> State:
        """Dense-output state at axial position y (within the sampled range)."""
        if not self.segments or y < self.segments[0].y_lo - 1e-12 or y > self.y_stop + 1e-12:
            raise ValueError(f"y={y} outside orbit range [0, {self.y_stop}]")
        i = _bisect.bisect_right(self._seg_ylo, y) - 1
        i = min(max(i, 0), len(self.segments) - 1)
        while i + 1 < len(self.segments) and y > self.segments[i].y_hi:
            i += 1
        seg = self.segments[i]
        t = min(max(y, seg.y_lo), seg.y_hi)
        return seg.state(seg.t_at_y(t))

    def rows(self) -> Iterator[tuple]:
        for i in range(len(self.y)):
            yield (self.y[i], self.g[i], self.gp[i], self.tau[i],
                   self.rho[i], self.k[i], self.d[i])

    # -- quadrature on the dense output --------------------------------------

    def quad(self, fn, y_lo: float | None = None, y_hi: float | None = None) -> float:
        """Integrate ``fn(y, g, gp) dy`` over [y_lo, y_hi] on the dense output.

        Five-point Gauss-Legendre per step segment; on g-chart segments the
        integrand picks up the Jacobian dy/dg = 1/gp.
        """
        y_lo = self.segments[0].y_lo if y_lo is None else y_lo
        y_hi = self.y_stop if y_hi is None else y_hi
        ts0, ts1, jac_gchart = [], [], []
        for seg in self.segments:
            if seg.y_hi <= y_lo or seg.y_lo >= y_hi:
                continue
            ta = seg.t_at_y(max(seg.y_lo, y_lo))
            tb = seg.t_at_y(min(seg.y_hi, y_hi))
            ts0.append((seg, ta, tb))
        if not ts0:
            return 0.0
        ys, gs, gps, wts = [], [], [], []
        for seg, ta, tb in ts0:
            mid = 0.5 * (ta + tb)
            half = 0.5 * (tb - ta)
            for xk, wk in zip(_GL_NODES, _GL_WEIGHTS):
                t = mid + half * xk
                a, b = seg.eval(t)
                if seg.chart == "y":
                    ys.append(t); gs.append(a); gps.append(b)
                    wts.append(wk * half)
                else:
                    ys.append(a); gs.append(t); gps.append(b)
                    wts.append(wk * half / b)  # dy = dg / gp
        vals = fn(np.array(ys), np.array(gs), np.array(gps))
        return float(np.sum(np.asarray(vals) * np.array(wts)))


def tau_drift_residual(orbit: Orbit, y1: float, y2: float) -> float:
    """Residual of tau(z2) - tau(z1) = integral of g*g'*rho dy on [z1, z2]."""
    s1, s2 = orbit.state_at(y1), orbit.state_at(y2)
    if orbit.perturbed:
        h, prm = orbit.config.H, orbit.params
        integral = orbit.quad(lambda y, g, gp: g * gp * rho_exact_grid(y, g, gp, h, prm), y1, y2)
    else:
        integral = 0.0
    return (s2.tau - s1.tau) - integral


# ---------------------------------------------------------------------------
# Dormand-Prince 4(5) integration with chart switching
# ---------------------------------------------------------------------------

_C2, _C3, _C4, _C5 = 0.2, 0.3, 0.8, 8.0 / 9.0
_A21 = 0.2
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

_MAX_STEPS = 2_000_000


def _try_step(f, t, u, fu, h):
    """One Dormand-Prince attempt; returns (u1, f1, err) with err possibly inf."""
    a0, b0 = u
    k1a, k1b = fu
    k2a, k2b = f(t + _C2 * h, a0 + h * _A21 * k1a, b0 + h * _A21 * k1b)
    k3a, k3b = f(t + _C3 * h,
                 a0 + h * (_A31 * k1a + _A32 * k2a),
                 b0 + h * (_A31 * k1b + _A32 * k2b))
    k4a, k4b = f(t + _C4 * h,
                 a0 + h * (_A41 * k1a + _A42 * k2a + _A43 * k3a),
                 b0 + h * (_A41 * k1b + _A42 * k2b + _A43 * k3b))
    k5a, k5b = f(t + _C5 * h,
                 a0 + h * (_A51 * k1a + _A52 * k2a + _A53 * k3a + _A54 * k4a),
                 b0 + h * (_A51 * k1b + _A52 * k2b + _A53 * k3b + _A54 * k4b))
    k6a, k6b = f(t + h,
                 a0 + h * (_A61 * k1a + _A62 * k2a + _A63 * k3a + _A64 * k4a + _A65 * k5a),
                 b0 + h * (_A61 * k1b + _A62 * k2b + _A63 * k3b + _A64 * k4b + _A65 * k5b))
    a1 = a0 + h * (_B1 * k1a + _B3 * k3a + _B4 * k4a + _B5 * k5a + _B6 * k6a)
    b1 = b0 + h * (_B1 * k1b + _B3 * k3b + _B4 * k4b + _B5 * k5b + _B6 * k6b)
    k7a, k7b = f(t + h, a1, b1)
    ea = h * (_E1 * k1a + _E3 * k3a + _E4 * k4a + _E5 * k5a + _E6 * k6a + _E7 * k7a)
    eb = h * (_E1 * k1b + _E3 * k3b + _E4 * k4b + _E5 * k5b + _E6 * k6b + _E7 * k7b)
    return (a1, b1), (k7a, k7b), (ea, eb)


def integrate(config: OdeConfig, params: MetricParams | None = None,
              perturbed: bool = True) -> Orbit:
    """Integrate the meridian orbit from (y, g, g') = (0, a, 0).

    Records one sample per accepted step, localizes g'-zeros and
    inflections (g''-zeros) to better than 1e-12 in y, switches to the
    g-chart when |g'| exceeds ``gp_switch`` (back below half of it), and
    declares blow-up past ``gp_blowup`` with a Richardson-style limit of
    (y, g) against 1/g'.
    """
    if perturbed and params is None:
        params = MetricParams()
    cfg = config
    atol, rtol = cfg.abs_tol, cfg.rel_tol
    gpp = _make_gpp(cfg.H, params, perturbed)

    def f_y(t, a, b):  # t = y, (a, b) = (g, gp)
        return b, gpp(t, a, b)

    def f_g(t, a, b):  # t = g, (a, b) = (y, gp)
        if b == 0.0:
            return math.nan, math.nan
        gg = gpp(a, t, b)
        return 1.0 / b, gg / b

    samples: list[tuple[float, float, float]] = [(0.0, cfg.a, 0.0)]
    segments: list[_Segment] = []
    events: list[Event] = []
    neck_count = 0
    terminal: Terminal | None = None
    blowup_y = blowup_g = None

    chart = "y"
    t = 0.0
    u = (cfg.a, 0.0)
    fu = f_y(t, *u)
    direction = 1.0

    # conservative initial step from the local derivative scale
    scale = max(abs(fu[0]), abs(fu[1]), 1.0)
    h = min(1e-3, 0.01 / scale, cfg.y_max)
    err_old = 1e-2

    def sample_of(tt: float, uu: tuple[float, float]) -> tuple[float, float, float]:
        if chart == "y":
            return tt, uu[0], uu[1]
        return uu[0], tt, uu[1]

    def event_state(seg: _Segment, tt: float) -> State:
        return seg.state(tt)

    def refine_gp_zero(seg: _Segment) -> float:
        return brentq(lambda x: seg.eval(x)[1], *sorted((seg.t0, seg.t1)), xtol=1e-14)

    def refine_gpp_zero(seg: _Segment) -> float:
        def fn(x: float) -> float:
            st = seg.state(x)
            return gpp(st.y, st.g, st.gp)
        return brentq(fn, *sorted((seg.t0, seg.t1)), xtol=1e-14)

    n_steps = 0
    while terminal is None:
        n_steps += 1
        if n_steps > _MAX_STEPS:
            terminal = Terminal.STEP_FAILURE
            break
        # clamp the step to the admissible t-range of this chart
        if chart == "y":
            h = min(h, cfg.y_max - t)
        elif direction < 0.0 and t + h <= 0.0:
            h = -0.5 * t
        if abs(h) < 1e-15 * max(1.0, abs(t)):
            terminal = Terminal.STEP_FAILURE
            break

        f = f_y if chart == "y" else f_g
        u1, f1, (ea, eb) = _try_step(f, t, u, fu, h)
        ok = math.isfinite(u1[0]) and math.isfinite(u1[1]) and math.isfinite(ea) and math.isfinite(eb)
        if ok:
            sa = atol + rtol * max(abs(u[0]), abs(u1[0]))
            sb = atol + rtol * max(abs(u[1]), abs(u1[1]))
            err = math.sqrt(0.5 * ((ea / sa) ** 2 + (eb / sb) ** 2))
        else:
            err = math.inf
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2) if math.isfinite(err) else 0.2
            continue

        seg = _Segment(chart, t, t + h, u, u1, fu, f1)
        t1 = t + h

        # -- events inside the accepted step ---------------------------------
        gp0, gp1 = u[1], u1[1]
        gpp0 = fu[1] if chart == "y" else fu[1] * u[1]
        gpp1 = f1[1] if chart == "y" else f1[1] * u1[1]
        found: list[tuple[float, str]] = []
        if chart == "y" and gp0 * gp1 < 0.0:
            found.append((refine_gp_zero(seg), "gp_zero"))
        if gpp0 * gpp1 < 0.0:
            found.append((refine_gpp_zero(seg), "gpp_zero"))
        found.sort(key=lambda ev: (ev[0] - t) / h)

        cut: float | None = None
        for t_ev, kind in found:
            st = event_state(seg, t_ev)
            events.append(Event(kind, st.y, st.g, st.gp))
            if kind == "gp_zero" and 0.0 < st.g < 0.5:
                neck_count += 1
                if cfg.stop_after_necks is not None and neck_count >= cfg.stop_after_necks:
                    cut = t_ev
                    terminal = Terminal.REACHED_YMAX
                    break

        if cut is not None:
            u1 = seg.eval(cut)
            f1 = f(cut, *u1)
            t1 = cut
            seg = _Segment(chart, t, t1, u, u1, fu, f1)

        segments.append(seg)
        samples.append(sample_of(t1, u1))
        g1 = u1[0] if chart == "y" else t1
        y1 = t1 if chart == "y" else u1[0]

        if terminal is not None:
            break

        # -- terminal conditions ---------------------------------------------
        if abs(u1[1]) >= cfg.gp_blowup:
            terminal = Terminal.BLOWUP_DETECTED
            tail = np.array(samples[-min(len(samples), 10):], dtype=float)
            big = np.abs(tail[:, 2]) >= 0.5 * cfg.gp_switch
            tail = tail[big] if np.count_nonzero(big) >= 3 else tail
            uu = 1.0 / tail[:, 2]
            deg = 2 if len(tail) >= 4 else 1
            blowup_y = float(np.polyfit(uu, tail[:, 0], deg)[-1])
            blowup_g = float(np.polyfit(uu, tail[:, 1], deg)[-1])
            events.append(Event("blowup", blowup_y, max(blowup_g, 0.0), u1[1]))
            break
        if g1 <= 0.0:
            raise OdeDomainError(
                f"g crossed 0 at y={y1} without blow-up (gp={u1[1]}); not clamped")
        if y1 >= cfg.y_max - 1e-14:
            terminal = Terminal.REACHED_YMAX
            break

        # -- step-size update and chart switching ----------------------------
        fac = 0.9 * err ** -0.14 * err_old ** 0.08 if err > 0.0 else 6.0
        h *= min(6.0, max(0.2, fac))
        err_old = max(err, 1e-8)

        if chart == "y" and abs(u1[1]) >= cfg.gp_switch:
            chart = "g"
            direction = math.copysign(1.0, u1[1])
            h = abs(h * u1[1]) * direction
            t, u = g1, (y1, u1[1])
            fu = f_g(t, *u)
        elif chart == "g" and abs(u1[1]) <= 0.5 * cfg.gp_switch:
            chart = "y"
            direction = 1.0
            h = abs(h / u1[1])
            t, u = y1, (g1, u1[1])
            fu = f_y(t, *u)
        else:
            t, u, fu = t1, u1, f1

    return Orbit(config=cfg, params=params, perturbed=perturbed, samples=samples,
                 segments=segments, events=events, terminal=terminal,
                 blowup_y=blowup_y, blowup_g=blowup_g)
