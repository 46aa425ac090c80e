"""Minimal deterministic SVG line/scatter plots."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2")


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str = ""
    style: str = "line"  # "line", "dashed" or "scatter"
    color: str = ""


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, t = [], start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def plot(series: Sequence[Series], title: str = "", xlabel: str = "", ylabel: str = "",
         logx: bool = False, logy: bool = False, width: int = 640, height: int = 420,
         annotations: Sequence[str] = ()) -> str:
    """Render series to an SVG document string. Non-positive values are dropped on log axes."""
    pts = []
    for s in series:
        keep = [(float(a), float(b)) for a, b in zip(s.x, s.y)
                if math.isfinite(a) and math.isfinite(b)
                and (not logx or a > 0) and (not logy or b > 0)]
        pts.append(keep)
    fx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    fy = (lambda v: math.log10(v)) if logy else (lambda v: v)
    xs = [fx(a) for p in pts for a, _ in p] or [0.0, 1.0]
    ys = [fy(b) for p in pts for _, b in p] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def sx(v):
        return ml + (fx(v) - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + ph - (fy(v) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">'
                   f'{escape(title)}</text>')
    for t in _ticks(x0, x1):
        px = ml + (t - x0) / (x1 - x0) * pw
        lab = f"{10 ** t:.3g}" if logx else f"{t:.4g}"
        out.append(f'<line x1="{px:.2f}" y1="{mt + ph}" x2="{px:.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{mt + ph + 18}" text-anchor="middle">{lab}</text>')
    for t in _ticks(y0, y1):
        py = mt + ph - (t - y0) / (y1 - y0) * ph
        lab = f"1e{t:g}" if logy else f"{t:.4g}"
        out.append(f'<line x1="{ml - 5}" y1="{py:.2f}" x2="{ml}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py + 4:.2f}" text-anchor="end">{lab}</text>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')

    for i, (s, p) in enumerate(zip(series, pts)):
        color = s.color or PALETTE[i % len(PALETTE)]
        if s.style == "scatter":
            for a, b in p:
                out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="2.5" fill="{color}"/>')
        elif p:
            dash = ' stroke-dasharray="6 4"' if s.style == "dashed" else ""
            coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in p)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        if s.label:
            ly = mt + 16 + 16 * i
            out.append(f'<rect x="{ml + pw - 150}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
            out.append(f'<text x="{ml + pw - 135}" y="{ly}">{escape(s.label)}</text>')
    for j, text in enumerate(annotations):
        out.append(f'<text x="{ml + 10}" y="{mt + 18 + 16 * j}">{escape(text)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
