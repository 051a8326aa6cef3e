"""Command-line front end: reproducible integration, classification,
shooting, balancing, surface and area reports, identity suites, and
H-sweeps with fitted convergence rates.

Every artifact embeds its run manifest (command, resolved configuration,
tool version, timestamp, paths); identical manifests reproduce bit-identical
outputs.  Set SOURCE_DATE_EPOCH to pin the timestamp.

Exit codes: 0 success, 2 configuration error, 3 integrator failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import UnclassifiableError, classify, skeleton_report
from .geometry import SurfaceProfile, build_surface
from .identities import identity_suite, orbit_integrals
from .metric import ConfigError, MetricDomainError, MetricParams
from .ode import Orbit, OdeConfig, OdeDomainError, Terminal, integrate
from .render import meridian_svg, phase_portrait_svg
from .shooting import (
    BracketInvalidError,
    CriticalResult,
    NoSignChangeError,
    balance_details,
    find_critical_a,
)

EXIT_CONFIG = 2
EXIT_INTEGRATOR = 3

CONFIG_KEYS = {
    "lambda": float, "p": float, "cutoff": str,
    "H": float, "a": float, "abs_tol": float, "rel_tol": float,
    "gp_switch": float, "gp_blowup": float, "y_max": float,
}


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        dt = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        dt = datetime.now(tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def read_config_file(path: str | Path) -> dict:
    """Plain-text key/value configuration: `key = value`, '#' comments."""
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, _, value = line.partition(sep)
                break
        else:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def _resolve(args: argparse.Namespace, need_a: bool = True) -> tuple[OdeConfig, MetricParams]:
    file_cfg = read_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(flag_name: str, file_key: str, default):
        v = getattr(args, flag_name, None)
        if v is not None:
            return v
        if file_key in file_cfg:
            return file_cfg[file_key]
        return default

    params = MetricParams(
        lam=pick("lam", "lambda", 0.1),
        p=pick("p", "p", 20.0),
        cutoff=pick("cutoff", "cutoff", "quintic"),
    )
    a = pick("a", "a", None) if need_a else 1.0
    if need_a and a is None:
        raise ConfigError("initial radius --a is required")
    config = OdeConfig(
        H=pick("H", "H", 0.01),
        a=a,
        abs_tol=pick("abs_tol", "abs_tol", 1e-10),
        rel_tol=pick("rel_tol", "rel_tol", 1e-10),
        gp_switch=pick("gp_switch", "gp_switch", 10.0),
        gp_blowup=pick("gp_blowup", "gp_blowup", 1e6),
        y_max=pick("y_max", "y_max", 20.0),
    )
    return config, params


def _manifest(command: str, config: dict, inputs: list[str] | None = None,
              outputs: list[str] | None = None) -> dict:
    return {
        "command": command,
        "tool": "cmc-shooter",
        "version": __version__,
        "timestamp": _timestamp(),
        "config": config,
        "inputs": inputs or [],
        "outputs": outputs or [],
    }


def _config_dict(cfg: OdeConfig, params: MetricParams, perturbed: bool,
                 **extra) -> dict:
    d = {
        "H": cfg.H, "a": cfg.a, "abs_tol": cfg.abs_tol, "rel_tol": cfg.rel_tol,
        "gp_switch": cfg.gp_switch, "gp_blowup": cfg.gp_blowup, "y_max": cfg.y_max,
        "lambda": params.lam, "p": params.p, "cutoff": params.cutoff,
        "perturbed": perturbed,
    }
    d.update(extra)
    return d


def _dump_json(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def write_orbit_csv(orbit: Orbit, path: str | Path, manifest: dict) -> None:
    lines = ["# manifest: " + json.dumps(manifest, sort_keys=True)]
    lines.append("y,g,gp,tau,rho,k,d")
    for row in orbit.rows():
        lines.append(",".join(repr(v) for v in row))
    lines.append("# events: " + json.dumps([e.to_dict() for e in orbit.events],
                                           sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def write_surface_csv(surface: SurfaceProfile, path: str | Path, manifest: dict) -> None:
    lines = ["# manifest: " + json.dumps(manifest, sort_keys=True)]
    lines.append("x,f,fp,Hresidual")
    for i in range(len(surface.x)):
        lines.append(",".join(repr(float(v)) for v in
                              (surface.x[i], surface.f[i], surface.fp[i],
                               surface.H_residual[i])))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_integrate(args: argparse.Namespace) -> int:
    config, params = _resolve(args)
    perturbed = not args.unperturbed
    orbit = integrate(config, params if perturbed else None, perturbed=perturbed)
    outputs = [p for p in (args.dump_orbit, args.skeleton, args.svg) if p]
    manifest = _manifest("integrate", _config_dict(config, params, perturbed),
                         outputs=outputs)
    if orbit.terminal == Terminal.STEP_FAILURE:
        sys.stderr.write("integrator failure: step size underflow\n")
        return EXIT_INTEGRATOR
    report = skeleton_report(orbit)
    report["manifest"] = manifest
    report["n_samples"] = len(orbit.y)
    report["y_stop"] = orbit.y_stop
    if args.dump_orbit:
        write_orbit_csv(orbit, args.dump_orbit, manifest)
    if args.svg:
        Path(args.svg).write_text(phase_portrait_svg(
            orbit, title=f"H={config.H} a={config.a} p={params.p}"))
    if args.skeleton:
        _dump_json(report, args.skeleton)
    _dump_json(report, args.out)
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    args.dump_orbit = None
    args.svg = None
    args.skeleton = None
    return cmd_integrate(args)


def _critical_to_dict(crit: CriticalResult) -> dict:
    return {
        "a_crit": crit.a_crit,
        "bracket_width": crit.bracket_width,
        "eps_pullback": crit.eps_pullback,
        "terminal_g": crit.terminal_g,
        "terminal_gp_magnitude": crit.terminal_gp_magnitude,
        "y5_star": crit.y5_star,
        "skeleton": crit.skeleton.to_dict(),
    }


def cmd_shoot(args: argparse.Namespace) -> int:
    config, params = _resolve(args, need_a=False)
    crit = find_critical_a(config.H, params, config,
                           bracket_width=args.bracket_width,
                           eps_pullback=args.eps_pullback)
    result = _critical_to_dict(crit)
    outputs = [p for p in (args.out, args.dump_orbit, args.svg) if p]
    manifest = _manifest("shoot", _config_dict(
        config, params, True,
        bracket_width=args.bracket_width, eps_pullback=args.eps_pullback),
        outputs=outputs)
    result["manifest"] = manifest
    if args.dump_orbit:
        write_orbit_csv(crit.profile, args.dump_orbit, manifest)
    if args.svg:
        Path(args.svg).write_text(phase_portrait_svg(
            crit.profile, title=f"critical profile H={config.H}"))
    _dump_json(result, args.out)
    return 0


def cmd_balance(args: argparse.Namespace) -> int:
    config, params = _resolve(args, need_a=False)
    res = balance_details(config.H, params.lam, config,
                          p_bracket=(args.p_lo, args.p_hi),
                          p_tol=args.p_tol,
                          eps_pullback=args.eps_pullback)
    manifest = _manifest("balance", _config_dict(
        config, params, True, p_lo=args.p_lo, p_hi=args.p_hi, p_tol=args.p_tol,
        eps_pullback=args.eps_pullback),
        outputs=[p for p in (args.out,) if p])
    _dump_json({
        "p": res.p,
        "residual": res.residual,
        "a_crit": res.critical.a_crit,
        "trace": [{"p": p, "residual": r} for p, r in res.trace],
        "manifest": manifest,
    }, args.out)
    return 0


def cmd_area(args: argparse.Namespace) -> int:
    if args.from_file:
        blob = json.loads(Path(args.from_file).read_text())
        cfg_d = blob["manifest"]["config"]
        params = MetricParams(lam=cfg_d["lambda"], p=cfg_d["p"], cutoff=cfg_d["cutoff"])
        config = OdeConfig(H=cfg_d["H"], a=blob["a_crit"] - blob["eps_pullback"],
                           abs_tol=cfg_d["abs_tol"], rel_tol=cfg_d["rel_tol"],
                           gp_switch=cfg_d["gp_switch"], gp_blowup=cfg_d["gp_blowup"],
                           y_max=min(cfg_d["y_max"], 6.0), stop_after_necks=2)
        profile = integrate(config, params)
        inputs = [args.from_file]
    else:
        config, params = _resolve(args, need_a=False)
        crit = find_critical_a(config.H, params, config,
                               eps_pullback=args.eps_pullback)
        profile = crit.profile
        inputs = []
    surface = build_surface(profile)
    outputs = [p for p in (args.out, args.dump_surface, args.svg) if p]
    manifest = _manifest("area", _config_dict(profile.config, params, True),
                         inputs=inputs, outputs=outputs)
    report = {
        "H": surface.H,
        "l0": surface.l0,
        "area_euclidean": surface.area_euclidean,
        "area_metric": surface.area_metric,
        "H2_area_euclidean": surface.H**2 * surface.area_euclidean,
        "H2_area_minus_48pi": surface.H**2 * surface.area_euclidean - 48.0 * math.pi,
        "H_residual_max": surface.H_residual_max,
        "y_end": surface.y_end,
        "manifest": manifest,
    }
    if args.dump_surface:
        write_surface_csv(surface, args.dump_surface, manifest)
    if args.svg:
        Path(args.svg).write_text(meridian_svg(surface, title=f"H={surface.H}"))
    _dump_json(report, args.out)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    if args.suite != "identities":
        raise ConfigError(f"unknown suite {args.suite!r}")
    reports = identity_suite()
    width = max(len(r.name) for r in reports)
    lines = [f"{'identity':<{width}}  {'analytic':>14} {'numeric':>14} "
             f"{'abs_error':>10} {'tol':>8}  result"]
    for r in reports:
        lines.append(f"{r.name:<{width}}  {r.analytic:>14.8g} {r.numeric:>14.8g} "
                     f"{r.abs_error:>10.2e} {r.tolerance:>8.0e}  "
                     f"{'PASS' if r.passed else 'FAIL'}")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.json:
        manifest = _manifest("verify", {"suite": args.suite}, outputs=[args.json])
        _dump_json({"manifest": manifest,
                    "reports": [r.to_dict() for r in reports]}, args.json)
    return 0 if all(r.passed for r in reports) else 1


def _sweep_one(task: tuple) -> dict:
    h_value, lam, p, abs_tol, rel_tol, eps_pullback = task
    params = MetricParams(lam=lam, p=p)
    config = OdeConfig(H=h_value, a=1.0, abs_tol=abs_tol, rel_tol=rel_tol)
    crit = find_critical_a(h_value, params, config, eps_pullback=eps_pullback)
    surface = build_surface(crit.profile)
    skel = crit.skeleton
    e3, e4, e5 = skel.require("y3", "y4", "y5")
    tau3 = -e3.g**2 + e3.g / math.sqrt(1 + e3.gp**2)
    tau5 = -e5.g**2 + e5.g / math.sqrt(1 + e5.gp**2)
    intk = crit.profile.quad(lambda y, g, gp: g * np.sqrt(1.0 + gp * gp))
    return {
        "H": h_value,
        "a_crit": crit.a_crit,
        "y4": e4.y,
        "y5": e5.y,
        "abs_y4_minus_2": abs(e4.y - 2.0),
        "abs_y5_minus_3": abs(e5.y - 3.0),
        "int_k": intk,
        "abs_int_k_minus_3": abs(intk - 3.0),
        "H2_area_minus_48pi": surface.H**2 * surface.area_euclidean - 48.0 * math.pi,
        "tau_decrement": tau5 - tau3,
        "l0": surface.l0,
        "area_euclidean": surface.area_euclidean,
        "area_metric": surface.area_metric,
    }


def fit_exponent(hs, values) -> float:
    """Least-squares slope of log|value| against log H."""
    hs = np.asarray(hs, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    return float(np.polyfit(np.log(hs), np.log(values), 1)[0])


def cmd_sweep(args: argparse.Namespace) -> int:
    h_list = [float(v) for v in args.h_list.split(",")]
    if len(h_list) < 3:
        raise ConfigError("--H-list needs at least 3 values")
    ratios = [h_list[i] / h_list[i + 1] for i in range(len(h_list) - 1)]
    if any(abs(r - ratios[0]) > 1e-9 * ratios[0] for r in ratios):
        raise ConfigError("--H-list must be a geometric progression")
    config, params = _resolve(args, need_a=False)
    jobs = args.jobs or int(os.environ.get("CMC_SHOOTER_JOBS", "1"))
    tasks = [(h, params.lam, params.p, config.abs_tol, config.rel_tol,
              args.eps_pullback) for h in h_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]

    hs = [r["H"] for r in rows]
    exponents = {
        "abs_y4_minus_2": fit_exponent(hs, [r["abs_y4_minus_2"] for r in rows]),
        "abs_y5_minus_3": fit_exponent(hs, [r["abs_y5_minus_3"] for r in rows]),
        "abs_int_k_minus_3": fit_exponent(hs, [r["abs_int_k_minus_3"] for r in rows]),
        "H2_area_minus_48pi": fit_exponent(hs, [r["H2_area_minus_48pi"] for r in rows]),
        "tau_decrement": fit_exponent(hs, [r["tau_decrement"] for r in rows]),
    }
    cols = ["H", "a_crit", "abs_y4_minus_2", "abs_y5_minus_3",
            "abs_int_k_minus_3", "H2_area_minus_48pi", "tau_decrement"]
    lines = ["  ".join(f"{c:>18}" for c in cols)]
    for r in rows:
        lines.append("  ".join(f"{r[c]:>18.10g}" for c in cols))
    lines.append("fitted exponents: " + ", ".join(
        f"{k}={v:.3f}" for k, v in exponents.items()))
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        manifest = _manifest("sweep", _config_dict(
            config, params, True, H_list=h_list, eps_pullback=args.eps_pullback,
            jobs=jobs), outputs=[args.out])
        _dump_json({"rows": rows, "exponents": exponents, "manifest": manifest},
                   args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(sp: argparse.ArgumentParser, need_a: bool = True) -> None:
    sp.add_argument("--H", dest="H", type=float, default=None, help="mean curvature")
    if need_a:
        sp.add_argument("--a", dest="a", type=float, default=None,
                        help="initial radius g(0)")
    sp.add_argument("--p", dest="p", type=float, default=None, help="cutoff target")
    sp.add_argument("--lambda", dest="lam", type=float, default=None,
                    help="cutoff scale")
    sp.add_argument("--cutoff", dest="cutoff", default=None, choices=["quintic"])
    sp.add_argument("--config", default=None, help="key/value config file")
    sp.add_argument("--abs-tol", dest="abs_tol", type=float, default=None)
    sp.add_argument("--rel-tol", dest="rel_tol", type=float, default=None)
    sp.add_argument("--gp-switch", dest="gp_switch", type=float, default=None)
    sp.add_argument("--gp-blowup", dest="gp_blowup", type=float, default=None)
    sp.add_argument("--y-max", dest="y_max", type=float, default=None)
    sp.add_argument("--out", default=None, help="write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cmc-shooter", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("integrate", help="integrate one orbit")
    _add_common(sp)
    sp.add_argument("--unperturbed", action="store_true")
    sp.add_argument("--dump-orbit", default=None, help="orbit CSV path")
    sp.add_argument("--skeleton", default=None, help="skeleton JSON path")
    sp.add_argument("--svg", default=None, help="phase-portrait SVG path")
    sp.set_defaults(fn=cmd_integrate)

    sp = sub.add_parser("classify", help="classify one orbit (H1/H2/H3)")
    _add_common(sp)
    sp.add_argument("--unperturbed", action="store_true")
    sp.set_defaults(fn=cmd_classify)

    sp = sub.add_parser("shoot", help="locate the critical initial radius")
    _add_common(sp, need_a=False)
    sp.add_argument("--eps-pullback", type=float, default=1e-8)
    sp.add_argument("--bracket-width", type=float, default=1e-12)
    sp.add_argument("--dump-orbit", default=None)
    sp.add_argument("--svg", default=None)
    sp.set_defaults(fn=cmd_shoot)

    sp = sub.add_parser("balance", help="balance the two singular slopes over p")
    _add_common(sp, need_a=False)
    sp.add_argument("--p-lo", type=float, default=-10.0)
    sp.add_argument("--p-hi", type=float, default=20.0)
    sp.add_argument("--p-tol", type=float, default=0.05)
    sp.add_argument("--eps-pullback", type=float, default=1e-8)
    sp.set_defaults(fn=cmd_balance)

    sp = sub.add_parser("area", help="reconstruct the surface and report areas")
    _add_common(sp, need_a=False)
    sp.add_argument("--from", dest="from_file", default=None,
                    help="shoot JSON to rebuild the profile from")
    sp.add_argument("--eps-pullback", type=float, default=1e-8)
    sp.add_argument("--dump-surface", default=None, help="surface CSV path")
    sp.add_argument("--svg", default=None, help="meridian SVG path")
    sp.set_defaults(fn=cmd_area)

    sp = sub.add_parser("verify", help="run an identity verification suite")
    sp.add_argument("--suite", default="identities")
    sp.add_argument("--json", default=None, help="JSON report path")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("sweep", help="H-sweep with fitted convergence rates")
    _add_common(sp, need_a=False)
    sp.add_argument("--H-list", dest="h_list", required=True,
                    help="comma-separated H values in geometric progression")
    sp.add_argument("--eps-pullback", type=float, default=1e-8)
    sp.add_argument("--jobs", type=int, default=None,
                    help="worker processes (default $CMC_SHOOTER_JOBS or 1)")
    sp.set_defaults(fn=cmd_sweep)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, BracketInvalidError, NoSignChangeError,
            UnclassifiableError, FileNotFoundError, json.JSONDecodeError,
            KeyError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except (OdeDomainError, MetricDomainError) as exc:
        sys.stderr.write(f"integrator failure: {exc}\n")
        return EXIT_INTEGRATOR


if __name__ == "__main__":
    sys.exit(main())
