"""Minimal native SVG rendering: polyline plots in a fixed viewbox."""
from __future__ import annotations

import numpy as np

from .geometry import SurfaceProfile
from .ode import Orbit

__all__ = ["polyline_svg", "phase_portrait_svg", "meridian_svg"]

_W, _H, _PAD = 640, 480, 48


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def polyline_svg(curves: list[tuple[np.ndarray, np.ndarray, str]],
                 title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    xs = np.concatenate([c[0] for c in curves])
    ys = np.concatenate([c[1] for c in curves])
    x0, x1 = float(np.min(xs)), float(np.max(xs))
    y0, y1 = float(np.min(ys)), float(np.max(ys))
    sx = (x1 - x0) or 1.0
    sy = (y1 - y0) or 1.0

    def mapx(v):
        return _PAD + (v - x0) / sx * (_W - 2 * _PAD)

    def mapy(v):
        return _H - _PAD - (v - y0) / sy * (_H - 2 * _PAD)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" '
        'fill="none" stroke="#888" stroke-width="1"/>',
    ]
    if x0 < 0.0 < x1:
        gx = mapx(0.0)
        parts.append(f'<line x1="{_fmt(gx)}" y1="{_PAD}" x2="{_fmt(gx)}" '
                     f'y2="{_H - _PAD}" stroke="#ccc" stroke-width="1"/>')
    if y0 < 0.0 < y1:
        gy = mapy(0.0)
        parts.append(f'<line x1="{_PAD}" y1="{_fmt(gy)}" x2="{_W - _PAD}" '
                     f'y2="{_fmt(gy)}" stroke="#ccc" stroke-width="1"/>')
    for cx, cy, color in curves:
        step = max(1, len(cx) // 4000)
        pts = " ".join(f"{_fmt(mapx(a))},{_fmt(mapy(b))}"
                       for a, b in zip(cx[::step], cy[::step]))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')
    if title:
        parts.append(f'<text x="{_W // 2}" y="24" text-anchor="middle" '
                     f'font-family="monospace" font-size="14">{title}</text>')
    if xlabel:
        parts.append(f'<text x="{_W // 2}" y="{_H - 12}" text-anchor="middle" '
                     f'font-family="monospace" font-size="12">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="14" y="{_H // 2}" text-anchor="middle" '
                     f'font-family="monospace" font-size="12" '
                     f'transform="rotate(-90 14 {_H // 2})">{ylabel}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def phase_portrait_svg(orbit: Orbit, title: str = "phase portrait") -> str:
    """Slope horizontal, radius vertical (the usual figure convention)."""
    return polyline_svg([(orbit.gp, orbit.g, "#1f5fbf")],
                        title=title, xlabel="g'", ylabel="g")


def meridian_svg(surface: SurfaceProfile, title: str = "meridian") -> str:
    return polyline_svg(
        [(surface.x, surface.f, "#1f5fbf"), (surface.x, -surface.f, "#1f5fbf")],
        title=title, xlabel="x", ylabel="r")
