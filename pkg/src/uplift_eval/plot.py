"""Minimal self-contained SVG line charts with confidence bands."""

from __future__ import annotations

import math
from html import escape
from typing import Sequence

from .metrics import QiniCurve

WIDTH, HEIGHT = 800, 600
MARGIN = dict(left=80, right=30, top=50, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _num(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    k = 0
    while start + k * step <= hi + 1e-12 * abs(step):
        out.append(start + k * step)
        k += 1
    return out


def qini_svg(curves: Sequence[QiniCurve], title: str = "") -> str:
    """Curves drawn as lines through (0, 0) and their points; CI bands shaded where available."""
    curves = list(curves)
    xs = [0.0] + [pt.s for c in curves for pt in c.points]
    ys = [0.0] + [v for c in curves for pt in c.points for v in (pt.value, pt.ci_low, pt.ci_high) if math.isfinite(v)]
    y_lo, y_hi = min(ys), max(ys)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = 0.0, max(xs)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return MARGIN["top"] + (y_hi - y) / (y_hi - y_lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="28" text-anchor="middle" font-family="sans-serif" font-size="18">{escape(title)}</text>')
    x0, y0 = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + pw}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{MARGIN["top"]}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for t in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{_num(px(t))}" y1="{y0}" x2="{_num(px(t))}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{_num(px(t))}" y="{y0 + 20}" text-anchor="middle" font-family="sans-serif" font-size="12">{t:g}</text>')
    for t in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{x0 - 5}" y1="{_num(py(t))}" x2="{x0}" y2="{_num(py(t))}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{_num(py(t) + 4)}" text-anchor="end" font-family="sans-serif" font-size="12">{t:.4g}</text>')
    out.append(f'<text x="{x0 + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle" font-family="sans-serif" font-size="14">share s</text>')
    out.append(f'<text x="20" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" font-family="sans-serif" font-size="14" '
               f'transform="rotate(-90 20 {MARGIN["top"] + ph / 2})">value</text>')
    if y_lo < 0 < y_hi:
        out.append(f'<line x1="{x0}" y1="{_num(py(0))}" x2="{x0 + pw}" y2="{_num(py(0))}" stroke="#999" stroke-dasharray="4 4"/>')

    for i, c in enumerate(curves):
        color = COLORS[i % len(COLORS)]
        band = [pt for pt in c.points if math.isfinite(pt.ci_low) and math.isfinite(pt.ci_high)]
        if len(band) >= 2:
            upper = " ".join(f"{_num(px(pt.s))},{_num(py(pt.ci_high))}" for pt in band)
            lower = " ".join(f"{_num(px(pt.s))},{_num(py(pt.ci_low))}" for pt in reversed(band))
            out.append(f'<polygon points="{upper} {lower}" fill="{color}" fill-opacity="0.15" stroke="none"/>')
        line = [(0.0, 0.0)] + [(pt.s, pt.value) for pt in c.points if math.isfinite(pt.value)]
        pts = " ".join(f"{_num(px(x))},{_num(py(y))}" for x, y in line)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        label = f"{c.score_name} ({c.variant}, {c.adjustment})"
        ly = MARGIN["top"] + 10 + 20 * i
        out.append(f'<line x1="{x0 + 15}" y1="{ly}" x2="{x0 + 40}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x0 + 46}" y="{ly + 4}" font-family="sans-serif" font-size="12">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(curves: Sequence[QiniCurve], path, title: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(qini_svg(curves, title))
