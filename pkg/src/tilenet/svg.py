"""Deterministic SVG renders of patches, nets and matchings."""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .core import Patch
from .matching import MatchResult
from .net import NetWindow

PALETTE = ("#f2c14e", "#5b8e7d", "#bc4b51", "#8cb369", "#4d6cfa", "#f4a259", "#9d75cb", "#6c757d")


@dataclass(frozen=True)
class Style:
    width: int = 800
    stroke: str = "#222222"
    stroke_width: float = 0.02
    point_radius: float = 0.06
    point_fill: str = "#1d3557"
    lattice_fill: str = "#e63946"
    line_color: str = "#457b9d"
    palette: tuple = PALETTE
    digits: int = 6
    title: str = ""


def _fmt(x: float, digits: int) -> str:
    s = f"{x:.{digits}f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _doc(lo, hi, body: list, style: Style) -> str:
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.02 * float(span.max())
    x0, y0 = lo[0] - pad, -(hi[1] + pad)
    w, h = span[0] + 2 * pad, span[1] + 2 * pad
    f = lambda v: _fmt(float(v), style.digits)
    height = max(1, int(round(style.width * h / w)))
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width}" height="{height}" '
        f'viewBox="{f(x0)} {f(y0)} {f(w)} {f(h)}">',
    ]
    if style.title:
        head.append(f"<title>{escape(style.title)}</title>")
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _points_attr(poly, digits: int) -> str:
    # SVG y grows downward; flip so the plane keeps its orientation
    return " ".join(f"{_fmt(x, digits)},{_fmt(-y, digits)}" for x, y in np.asarray(poly).tolist())


def _render_patch(patch: Patch, style: Style) -> str:
    n = patch.rule.n
    classes = [f".t{k}{{fill:{style.palette[k % len(style.palette)]}}}" for k in range(n)]
    body = [f'<style>{" ".join(classes)}</style>',
            f'<g stroke="{style.stroke}" stroke-width="{_fmt(style.stroke_width, style.digits)}" stroke-linejoin="round">']
    lo, hi = np.full(2, np.inf), np.full(2, -np.inf)
    for k in range(len(patch)):
        poly = patch.polygon(k)
        lo, hi = np.minimum(lo, poly.min(axis=0)), np.maximum(hi, poly.max(axis=0))
        body.append(f'<polygon class="t{int(patch.types[k])}" points="{_points_attr(poly, style.digits)}"/>')
    body.append("</g>")
    return _doc(lo, hi, body, style)


def _circles(points, fill: str, style: Style) -> list:
    r = _fmt(style.point_radius, style.digits)
    out = [f'<g fill="{fill}">']
    out += [f'<circle cx="{_fmt(x, style.digits)}" cy="{_fmt(-y, style.digits)}" r="{r}"/>'
            for x, y in np.asarray(points).tolist()]
    out.append("</g>")
    return out


def _render_net(net: NetWindow, style: Style) -> str:
    pts = net.points
    return _doc(pts.min(axis=0), pts.max(axis=0), _circles(pts, style.point_fill, style), style)


def _render_match(res: MatchResult, style: Style) -> str:
    a, b = res.net_points[res.pairs[:, 0]], res.lattice_points[res.pairs[:, 1]]
    allp = np.vstack([res.net_points, res.lattice_points])
    d = style.digits
    body = [f'<g stroke="{style.line_color}" stroke-width="{_fmt(style.stroke_width, d)}">']
    body += [f'<line x1="{_fmt(p[0], d)}" y1="{_fmt(-p[1], d)}" x2="{_fmt(q[0], d)}" y2="{_fmt(-q[1], d)}"/>'
             for p, q in zip(a.tolist(), b.tolist())]
    body.append("</g>")
    body += _circles(res.net_points, style.point_fill, style)
    body += _circles(res.lattice_points, style.lattice_fill, style)
    return _doc(allp.min(axis=0), allp.max(axis=0), body, style)


def render_svg(obj, style: Style | None = None) -> str:
    """SVG text for a Patch (filled polygons, one class per tile type), a net (circles)
    or a MatchResult (one line per pair plus both point sets)."""
    style = style or Style()
    if isinstance(obj, Patch):
        if len(obj) == 0:
            raise ValueError("nothing to render")
        return _render_patch(obj, style)
    if isinstance(obj, NetWindow):
        if len(obj) == 0:
            raise ValueError("nothing to render")
        return _render_net(obj, style)
    if isinstance(obj, MatchResult):
        if len(obj.net_points) + len(obj.lattice_points) == 0:
            raise ValueError("nothing to render")
        return _render_match(obj, style)
    raise TypeError(f"cannot render {type(obj).__name__}")
