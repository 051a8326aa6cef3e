"""Event skeleton, trichotomy classification, and circle-comparison maps.

Turns a raw orbit into the ordered event skeleton y1..y6, decides whether
the run completed two small-radius necks (H1), exactly one (H2), or none
before blow-up (H3), and measures how closely the arc between the third
inflection and the bulge tracks the translated unit circle
``h(y) = sqrt(1 - (y - y4)^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .metric import MetricParams
from .ode import Event, Orbit, State, Terminal, rho_exact

__all__ = [
    "Case",
    "EventSkeleton",
    "ComparisonSphere",
    "UnclassifiableError",
    "SkeletonError",
    "MissingEventError",
    "OutOfRangeError",
    "classify",
    "tau_at_events",
    "tau_diagnostics",
    "phi_maps",
    "monotone_on",
    "k_range",
    "skeleton_report",
]

NECK_RADIUS = 0.5
BULGE_WINDOW = (0.5, 1.2)


class UnclassifiableError(RuntimeError):
    """Orbit terminated by step failure or y_max before the trichotomy resolved."""


class SkeletonError(RuntimeError):
    """Event sequence violates the expected skeleton structure."""


class MissingEventError(KeyError):
    """A referenced skeleton event is absent."""


class OutOfRangeError(ValueError):
    """No circle preimage exists (g > 1)."""


class Case(str, Enum):
    H1 = "H1"
    H2 = "H2"
    H3 = "H3"


@dataclass(frozen=True)
class ComparisonSphere:
    """Translated unit circle h(y) = sqrt(1 - (y - y4)^2) on [y4-1, y4+1]."""

    y4: float

    def h(self, y):
        return np.sqrt(1.0 - (np.asarray(y, dtype=float) - self.y4) ** 2)

    def hp(self, y):
        u = np.asarray(y, dtype=float) - self.y4
        return -u / np.sqrt(1.0 - u**2)


@dataclass(frozen=True)
class EventSkeleton:
    """Ordered events of one orbit: inflections y1, y3, y5; slope zeros y2, y4;
    the unique slope-1 point y6 in (y3, y4); and the trichotomy case.

    For H2 orbits y5 is the blow-up location rather than an inflection.
    """

    case: Case
    y1: Event | None = None
    y2: Event | None = None
    y3: Event | None = None
    y4: Event | None = None
    y5: Event | None = None
    y6: Event | None = None

    def require(self, *names: str) -> list[Event]:
        out = []
        for n in names:
            e = getattr(self, n)
            if e is None:
                raise MissingEventError(f"skeleton (case {self.case.value}) has no {n}")
            out.append(e)
        return out

    def to_dict(self) -> dict:
        d: dict = {"case": self.case.value}
        for n in ("y1", "y2", "y3", "y4", "y5", "y6"):
            e = getattr(self, n)
            d[n] = e.to_dict() if e is not None else None
        return d


def _first(events: list[Event], kind: str, after: float = -math.inf,
           pred=lambda e: True) -> Event | None:
    for e in events:
        if e.kind == kind and e.y > after and pred(e):
            return e
    return None


def classify(orbit: Orbit) -> EventSkeleton:
    """Walk the event list into the y1..y6 skeleton and the trichotomy case.

    H1 needs two slope zeros with g in (0, 1/2) before termination, H2
    exactly one, H3 none before blow-up.  An orbit stopped by step failure
    or by y_max before either resolution is unclassifiable.
    """
    if orbit.terminal == Terminal.STEP_FAILURE:
        raise UnclassifiableError("orbit terminated by step failure")
    necks = [e for e in orbit.events
             if e.kind == "gp_zero" and 0.0 < e.g < NECK_RADIUS]
    blowup = orbit.events_of("blowup")
    if len(necks) >= 2:
        case = Case.H1
    elif blowup:
        case = Case.H2 if len(necks) == 1 else Case.H3
    else:
        raise UnclassifiableError(
            f"reached y={orbit.y_stop} with {len(necks)} neck(s) and no blow-up")

    evs = orbit.events
    y1 = _first(evs, "gpp_zero", pred=lambda e: e.gp < 0.0)
    y2 = y3 = y4 = y5 = y6 = None
    if case is not Case.H3 and y1 is not None:
        y2 = _first(evs, "gp_zero", after=y1.y, pred=lambda e: 0.0 < e.g < NECK_RADIUS)
    if y2 is not None:
        y3 = _first(evs, "gpp_zero", after=y2.y, pred=lambda e: e.gp > 0.0)
    if y3 is not None:
        y4 = _first(evs, "gp_zero", after=y3.y)
    if y4 is not None:
        if not (BULGE_WINDOW[0] < y4.g < BULGE_WINDOW[1]):
            raise SkeletonError(f"bulge radius g(y4)={y4.g} outside {BULGE_WINDOW}")
        if case is Case.H1:
            y5 = _first(evs, "gpp_zero", after=y4.y, pred=lambda e: e.gp < 0.0)
        else:
            y5 = blowup[0]
        y6 = _locate_y6(orbit, y3.y, y4.y)

    skel = EventSkeleton(case=case, y1=y1, y2=y2, y3=y3, y4=y4, y5=y5, y6=y6)
    _validate_order(skel)
    return skel


def _validate_order(skel: EventSkeleton) -> None:
    ys = [getattr(skel, n).y for n in ("y1", "y2", "y3", "y4", "y5")
          if getattr(skel, n) is not None]
    if any(b <= a for a, b in zip(ys, ys[1:])) or (ys and ys[0] <= 0.0):
        raise SkeletonError(f"event locations not strictly increasing: {ys}")
    if skel.y6 is not None and skel.y3 is not None and skel.y4 is not None:
        if not (skel.y3.y < skel.y6.y < skel.y4.y):
            raise SkeletonError("y6 not inside (y3, y4)")


def _locate_y6(orbit: Orbit, y3: float, y4: float) -> Event | None:
    """Unique slope-1 point in (y3, y4), by bracketed refinement on samples.

    Uniqueness is verified by counting sign changes of gp - 1 over the
    samples in the interval.
    """
    sel = (orbit.y > y3) & (orbit.y < y4)
    ys = np.concatenate(([y3], orbit.y[sel], [y4]))
    vals = np.concatenate(([orbit.state_at(y3).gp - 1.0],
                           orbit.gp[sel] - 1.0,
                           [orbit.state_at(y4).gp - 1.0]))
    sign_changes = np.flatnonzero(vals[:-1] * vals[1:] < 0.0)
    if len(sign_changes) != 1:
        raise SkeletonError(
            f"expected exactly one crossing of gp=1 in (y3, y4), found {len(sign_changes)}")
    i = sign_changes[0]
    y6 = brentq(lambda y: orbit.state_at(y).gp - 1.0, ys[i], ys[i + 1], xtol=1e-13)
    st = orbit.state_at(y6)
    return Event("gp_one", st.y, st.g, st.gp)


def tau_at_events(skeleton: EventSkeleton, orbit: Orbit) -> list[tuple[str, float]]:
    """Delaunay parameter at y1..y5 (present events required)."""
    out = []
    for name in ("y1", "y2", "y3", "y4", "y5"):
        (e,) = skeleton.require(name)
        out.append((name, State(e.y, e.g, e.gp).tau))
    return out


def tau_diagnostics(skeleton: EventSkeleton, orbit: Orbit) -> dict[str, float]:
    """Caller-facing drift diagnostics at the bulge."""
    (e4,) = skeleton.require("y4")
    a = orbit.config.a
    return {
        "tau_y4_minus_tau0": State(e4.y, e4.g, e4.gp).tau - (a - a * a),
        "g_y4_minus_a": e4.g - a,
    }


def _interval_states(orbit: Orbit, y_lo: float, y_hi: float,
                     n_extra: int = 64) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sel = (orbit.y >= y_lo) & (orbit.y <= y_hi)
    ys = orbit.y[sel]
    gs = orbit.g[sel]
    gps = orbit.gp[sel]
    extra = np.linspace(y_lo, y_hi, n_extra)
    st = [orbit.state_at(v) for v in extra]
    ys = np.concatenate([ys, extra])
    gs = np.concatenate([gs, [s.g for s in st]])
    gps = np.concatenate([gps, [s.gp for s in st]])
    order = np.argsort(ys)
    return ys[order], gs[order], gps[order]


def phi_maps(skeleton: EventSkeleton, orbit: Orbit) -> tuple[float, float]:
    """Circle-comparison maps against h centered at y4.

    Returns ``sup |Phi1(y) - y|`` on [y6, y4], where Phi1 matches slopes
    (g'(y) = h'(Phi1(y)), Phi1(y4) = y4), and
    ``sup |Phi2(y) - y| / (H/g^2 + |log g| + 1)`` on [y3, y6], where Phi2
    matches heights (g(y) = h(Phi2(y)), Phi2(y6) in (y4-1, y4)).  Both maps
    invert h in closed form on the monotone branch.
    """
    if skeleton.case is Case.H3:
        raise MissingEventError("phi maps need case H1 or H2")
    e3, e4, e6 = skeleton.require("y3", "y4", "y6")
    y4 = e4.y
    H = orbit.config.H

    ys, gs, gps = _interval_states(orbit, e6.y, y4)
    phi1 = y4 - gps / np.sqrt(1.0 + gps**2)
    sup1 = float(np.max(np.abs(phi1 - ys)))

    ys, gs, gps = _interval_states(orbit, e3.y, e6.y)
    if np.any(gs > 1.0):
        raise OutOfRangeError(f"g exceeds 1 on [y3, y6] (max {float(np.max(gs))})")
    phi2 = y4 - np.sqrt(1.0 - gs**2)
    if not (y4 - 1.0 < y4 - math.sqrt(1.0 - e6.g**2) < y4):
        raise SkeletonError("Phi2(y6) outside (y4 - 1, y4)")
    weight = H / gs**2 + np.abs(np.log(gs)) + 1.0
    sup2 = float(np.max(np.abs(phi2 - ys) / weight))
    return sup1, sup2


def monotone_on(orbit: Orbit, y_lo: float, y_hi: float, column: str,
                direction: int) -> bool:
    """True when the sampled column is monotone (non-strict) on [y_lo, y_hi]."""
    sel = (orbit.y >= y_lo) & (orbit.y <= y_hi)
    vals = getattr(orbit, column)[sel]
    diffs = np.diff(vals) * direction
    return bool(np.all(diffs >= -1e-12))


def k_range(orbit: Orbit, y_lo: float, y_hi: float) -> tuple[float, float]:
    sel = (orbit.y >= y_lo) & (orbit.y <= y_hi)
    if not np.any(sel):
        raise ValueError(f"no samples in [{y_lo}, {y_hi}]")
    return float(np.min(orbit.k[sel])), float(np.max(orbit.k[sel]))


def skeleton_report(orbit: Orbit) -> dict:
    """JSON-ready report: case, y1..y6, tau at events, phi-map sups, k extremes."""
    try:
        skel = classify(orbit)
    except UnclassifiableError as exc:
        return {"case": None, "reason": str(exc), "terminal": orbit.terminal.value}
    report = skel.to_dict()
    report["terminal"] = orbit.terminal.value
    try:
        report["tau_at_events"] = dict(tau_at_events(skel, orbit))
        report["tau_diagnostics"] = tau_diagnostics(skel, orbit)
    except MissingEventError:
        report["tau_at_events"] = None
    try:
        sup1, sup2 = phi_maps(skel, orbit)
        report["phi_map_sups"] = {"phi1": sup1, "phi2_weighted": sup2}
    except (MissingEventError, OutOfRangeError):
        report["phi_map_sups"] = None
    if skel.y3 is not None and skel.y4 is not None:
        kmin, kmax = k_range(orbit, skel.y3.y, skel.y4.y)
        report["k_extremes"] = {"y3_y4": [kmin, kmax]}
        if skel.y5 is not None:
            kmin, kmax = k_range(orbit, skel.y4.y, skel.y5.y)
            report["k_extremes"]["y4_y5"] = [kmin, kmax]
    else:
        report["k_extremes"] = None
    return report
