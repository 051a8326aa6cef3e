"""Parameter searches around the singular shooting value.

``find_critical_a`` bisects the initial radius against the trichotomy
predicate (two completed necks = H1) down to a prescribed bracket width and
re-integrates just below the boundary.  ``balance_p`` nests that search
inside a sign-change bisection over the cutoff target p, equalizing the
slopes at the first and last inflections.  ``even_extension_check`` probes
the C^2 closing of the profile at the pole.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .analysis import Case, EventSkeleton, classify
from .metric import MetricParams
from .ode import Orbit, OdeConfig, rho_at_pole, integrate

__all__ = [
    "CriticalResult",
    "RegularityReport",
    "BalanceResult",
    "BracketInvalidError",
    "NoSignChangeError",
    "InsufficientSamplesError",
    "find_critical_a",
    "singular_profile",
    "balance_p",
    "balance_details",
    "even_extension_check",
    "pullback_sweep",
]

DEFAULT_BRACKET = (0.95, 1.05)
DEFAULT_EPS_PULLBACK = 1e-8
SEARCH_Y_MAX = 6.0


class BracketInvalidError(RuntimeError):
    """Endpoint classifications do not straddle the H1 boundary."""


class NoSignChangeError(RuntimeError):
    """The p-bracket does not straddle slope balance."""


class InsufficientSamplesError(RuntimeError):
    """Too few steep-slope samples near the pole for a regularity fit."""


@dataclass(frozen=True)
class CriticalResult:
    """Outcome of the critical-initial-value search.

    ``profile`` is the orbit at ``a_crit - eps_pullback`` (H1 side), run
    until its second neck; ``terminal_g`` is the radius there,
    ``terminal_gp_magnitude`` the steepest slope (attained at the y5
    inflection), and ``y5_star`` the inflection location.
    """

    a_crit: float
    bracket_width: float
    profile: Orbit
    terminal_g: float
    terminal_gp_magnitude: float
    y5_star: float
    skeleton: EventSkeleton
    eps_pullback: float
    H: float
    params: MetricParams

    @property
    def bracket(self) -> tuple[float, float]:
        return self.a_crit - self.bracket_width, self.a_crit + self.bracket_width


@dataclass(frozen=True)
class RegularityReport:
    """Pole-closing diagnostics of a singular profile."""

    dy_dg_limit: float
    inv_ggp_limit: float
    rho_limit: float
    second_derivative_estimate: float


@dataclass(frozen=True)
class BalanceResult:
    p: float
    residual: float
    trace: list[tuple[float, float]]
    critical: CriticalResult


def _search_config(config: OdeConfig | None, H: float, a: float) -> OdeConfig:
    if config is None:
        config = OdeConfig(H=H, a=a)
    return replace(config, H=H, a=a, y_max=min(config.y_max, SEARCH_Y_MAX),
                   stop_after_necks=2)


def _case_at(H: float, a: float, params: MetricParams,
             config: OdeConfig | None) -> tuple[Case, Orbit]:
    orbit = integrate(_search_config(config, H, a), params)
    return classify(orbit).case, orbit


def find_critical_a(H: float, params: MetricParams,
                    config: OdeConfig | None = None, *,
                    bracket: tuple[float, float] = DEFAULT_BRACKET,
                    bracket_width: float = 1e-12,
                    eps_pullback: float = DEFAULT_EPS_PULLBACK) -> CriticalResult:
    """Bisect the boundary of the two-neck set over ``bracket``.

    The lower endpoint must classify H1 and the upper must not; otherwise
    ``BracketInvalidError`` (typically H too large for the chosen cutoff).
    The returned profile is run at ``a_crit - eps_pullback``.
    """
    lo, hi = bracket
    case_lo, _ = _case_at(H, lo, params, config)
    case_hi, _ = _case_at(H, hi, params, config)
    if case_lo is not Case.H1 or case_hi is Case.H1:
        raise BracketInvalidError(
            f"bracket [{lo}, {hi}] does not straddle the H1 boundary: "
            f"classify({lo})={case_lo.value}, classify({hi})={case_hi.value} "
            f"(H={H} may be too large for lam={params.lam}, p={params.p})")
    while hi - lo > bracket_width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # bracket at floating-point resolution
            break
        case_mid, _ = _case_at(H, mid, params, config)
        if case_mid is Case.H1:
            lo = mid
        else:
            hi = mid
    a_crit = 0.5 * (lo + hi)

    profile = integrate(_search_config(config, H, a_crit - eps_pullback), params)
    skel = classify(profile)
    if skel.case is not Case.H1 or skel.y5 is None:
        raise BracketInvalidError(
            f"pullback orbit at a_crit - {eps_pullback} classifies {skel.case.value}; "
            "decrease eps_pullback")
    return CriticalResult(
        a_crit=a_crit,
        bracket_width=0.5 * (hi - lo),
        profile=profile,
        terminal_g=float(profile.g[-1]),
        terminal_gp_magnitude=float(np.max(np.abs(profile.gp))),
        y5_star=skel.y5.y,
        skeleton=skel,
        eps_pullback=eps_pullback,
        H=H,
        params=params,
    )


def singular_profile(H: float, params: MetricParams,
                     config: OdeConfig | None = None, *,
                     eps_pullback: float = DEFAULT_EPS_PULLBACK,
                     critical: CriticalResult | None = None,
                     ) -> tuple[Orbit, float, float]:
    """Profile just below the critical value: ``(orbit, y5_star, g_floor)``.

    ``g_floor`` is the terminal (second-neck) radius, which tends to 0 as
    ``eps_pullback`` does; ``y5_star`` is the last-inflection location.
    """
    if critical is None:
        critical = find_critical_a(H, params, config, eps_pullback=eps_pullback)
    if math.isclose(eps_pullback, critical.eps_pullback, rel_tol=1e-9):
        return critical.profile, critical.y5_star, critical.terminal_g
    orbit = integrate(_search_config(config, H, critical.a_crit - eps_pullback), params)
    skel = classify(orbit)
    if skel.case is not Case.H1 or skel.y5 is None:
        raise BracketInvalidError(
            f"pullback orbit at a_crit - {eps_pullback} classifies {skel.case.value}")
    return orbit, skel.y5.y, float(orbit.g[-1])


def pullback_sweep(H: float, params: MetricParams,
                   config: OdeConfig | None = None, *,
                   eps_list: tuple[float, ...] = (1e-6, 1e-8, 1e-10),
                   critical: CriticalResult | None = None) -> list[dict]:
    """Slope and tau diagnostics at y1/y3/y5 for a pullback sequence."""
    if critical is None:
        critical = find_critical_a(H, params, config)
    rows = []
    for eps in eps_list:
        orbit, y5_star, g_floor = singular_profile(
            H, params, config, eps_pullback=eps, critical=critical)
        skel = classify(orbit)
        e1, e3, e5 = skel.require("y1", "y3", "y5")
        rows.append({
            "eps_pullback": eps,
            "gp_y1": e1.gp,
            "gp_y3": e3.gp,
            "gp_y5": e5.gp,
            "tau_y1": -e1.g**2 + e1.g / math.sqrt(1 + e1.gp**2),
            "tau_y3": -e3.g**2 + e3.g / math.sqrt(1 + e3.gp**2),
            "tau_y5": -e5.g**2 + e5.g / math.sqrt(1 + e5.gp**2),
            "y5_star": y5_star,
            "g_floor": g_floor,
            "tau_last": float(orbit.tau[-1]),
        })
    return rows


def _balance_residual(H: float, lam: float, p: float,
                      config: OdeConfig | None, eps_pullback: float,
                      inner_width: float,
                      warm: tuple[float, float] | None) -> tuple[float, CriticalResult]:
    params = MetricParams(lam=lam, p=p)
    bracket = DEFAULT_BRACKET
    if warm is not None:
        lo = max(DEFAULT_BRACKET[0], warm[0])
        hi = min(DEFAULT_BRACKET[1], warm[1])
        try:
            crit = find_critical_a(H, params, config, bracket=(lo, hi),
                                   bracket_width=inner_width,
                                   eps_pullback=eps_pullback)
        except BracketInvalidError:
            crit = find_critical_a(H, params, config, bracket=bracket,
                                   bracket_width=inner_width,
                                   eps_pullback=eps_pullback)
    else:
        crit = find_critical_a(H, params, config, bracket=bracket,
                               bracket_width=inner_width,
                               eps_pullback=eps_pullback)
    e1, e5 = crit.skeleton.require("y1", "y5")
    return abs(e5.gp) - abs(e1.gp), crit


def balance_details(H: float, lam: float, config: OdeConfig | None = None, *,
                    p_bracket: tuple[float, float] = (-10.0, 20.0),
                    p_tol: float = 0.05,
                    eps_pullback: float = DEFAULT_EPS_PULLBACK,
                    inner_width: float = 1e-10,
                    max_iter: int = 60) -> BalanceResult:
    """Bisection over p of the slope-balance residual |g'(y5)| - |g'(y1)|.

    Each residual evaluation nests a critical-a search; its bracket is
    warm-started from the previous evaluation.  Raises
    ``NoSignChangeError`` when the endpoints do not straddle balance.
    """
    p_lo, p_hi = p_bracket
    trace: list[tuple[float, float]] = []

    r_hi, crit_hi = _balance_residual(H, lam, p_hi, config, eps_pullback,
                                      inner_width, None)
    trace.append((p_hi, r_hi))
    warm = _warm_bracket(crit_hi)
    r_lo, crit_lo = _balance_residual(H, lam, p_lo, config, eps_pullback,
                                      inner_width, warm)
    trace.append((p_lo, r_lo))
    if r_lo * r_hi >= 0.0:
        raise NoSignChangeError(
            f"balance residual does not change sign on [{p_lo}, {p_hi}]: "
            f"residual({p_lo})={r_lo:.6g}, residual({p_hi})={r_hi:.6g}")

    best = (p_hi, r_hi, crit_hi) if abs(r_hi) < abs(r_lo) else (p_lo, r_lo, crit_lo)
    warm = _warm_bracket(best[2])
    for _ in range(max_iter):
        if p_hi - p_lo <= p_tol:
            break
        p_mid = 0.5 * (p_lo + p_hi)
        r_mid, crit_mid = _balance_residual(H, lam, p_mid, config, eps_pullback,
                                            inner_width, warm)
        trace.append((p_mid, r_mid))
        warm = _warm_bracket(crit_mid)
        if abs(r_mid) < abs(best[1]):
            best = (p_mid, r_mid, crit_mid)
        if r_mid * r_hi < 0.0:
            p_lo, r_lo = p_mid, r_mid
        else:
            p_hi, r_hi = p_mid, r_mid
    return BalanceResult(p=best[0], residual=best[1], trace=trace, critical=best[2])


def _warm_bracket(crit: CriticalResult, margin: float = 2e-3) -> tuple[float, float]:
    return crit.a_crit - margin, crit.a_crit + margin


def balance_p(H: float, lam: float, config: OdeConfig | None = None,
              **kwargs) -> float:
    """Cutoff target p at which the two singular slopes balance."""
    return balance_details(H, lam, config, **kwargs).p


def even_extension_check(profile: Orbit, *, gp_switch: float | None = None
                         ) -> RegularityReport:
    """Pole-regularity diagnostics from the steep descending branch.

    Fits dy/dg = 1/g' against g on the pole-approach window (between the
    last bulge and the slope extremum), reports the limits of dy/dg
    (expected 0) and of 1/(g*g') (expected magnitude 1 + rho_inf/2 with
    rho_inf the pole limit of rho), and a finite-difference estimate of
    the even extension's second derivative at g = 0.
    """
    thresh = profile.config.gp_switch if gp_switch is None else gp_switch
    necks = [e for e in profile.events if e.kind == "gp_zero" and e.g >= 0.5]
    y_start = max((e.y for e in necks), default=0.0)
    sel = (profile.y >= y_start) & (profile.gp < 0.0)
    ys, gs, gps = profile.y[sel], profile.g[sel], profile.gp[sel]
    if len(gps) == 0:
        raise InsufficientSamplesError("no descending samples after the last bulge")
    i_max = int(np.argmax(np.abs(gps)))
    ys, gs, gps = ys[: i_max + 1], gs[: i_max + 1], gps[: i_max + 1]
    steep = np.abs(gps) > thresh
    if int(np.count_nonzero(steep)) < 20:
        raise InsufficientSamplesError(
            f"only {int(np.count_nonzero(steep))} samples with |g'| > {thresh}; need 20")
    gs_s, gps_s = gs[steep], gps[steep]

    v = 1.0 / (gs_s * gps_s)
    i_lim = int(np.argmin(np.abs(v)))
    inv_ggp_limit = float(v[i_lim])
    dy_dg_limit = float(1.0 / gps_s[-1])

    # finite difference of dy/dg across the plateau approximates y''(0)
    j = max(0, i_lim - 8)
    d_dydg = 1.0 / gps_s[i_lim] - 1.0 / gps_s[j]
    d_g = gs_s[i_lim] - gs_s[j]
    second = float(d_dydg / d_g) if d_g != 0.0 else math.nan

    if profile.perturbed:
        rho_limit = rho_at_pole(float(ys[-1]), profile.config.H, profile.params)
    else:
        rho_limit = 0.0
    return RegularityReport(
        dy_dg_limit=dy_dg_limit,
        inv_ggp_limit=inv_ggp_limit,
        rho_limit=rho_limit,
        second_derivative_estimate=second,
    )
