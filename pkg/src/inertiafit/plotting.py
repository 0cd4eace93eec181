"""Minimal, deterministic SVG line charts for sweep results."""
from __future__ import annotations

import math
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=80, right=20, top=40, bottom=50)


def _nice_ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


def line_chart_svg(x: Sequence[float], y: Sequence[float], *, truth: Optional[float] = None,
                   title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """SVG text of ``y`` against ``x``.

    The data line is a ``<path id="estimate">``; NaN values break it. A
    dashed ``<path id="truth">`` marks ``truth`` when given.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    finite = np.isfinite(y)
    ys = y[finite].tolist() + ([truth] if truth is not None else [])
    y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    pad = 0.05 * (y_hi - y_lo or abs(y_hi) or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = float(x.min()), float(x.max())
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return MARGIN["top"] + (y_hi - v) / (y_hi - y_lo) * ph

    parts = []
    pen_up = True
    for xv, yv in zip(x, y):
        if not math.isfinite(yv):
            pen_up = True
            continue
        parts.append(f"{'M' if pen_up else 'L'}{px(xv):.2f},{py(yv):.2f}")
        pen_up = False

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">'
        f'{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    for t in _nice_ticks(x_lo, x_hi):
        out.append(f'<text x="{px(t):.2f}" y="{HEIGHT - MARGIN["bottom"] + 16}" '
                   f'text-anchor="middle" font-size="11">{t:g}</text>')
    for t in _nice_ticks(y_lo, y_hi):
        out.append(f'<line x1="{MARGIN["left"]}" x2="{MARGIN["left"] + pw}" y1="{py(t):.2f}" '
                   f'y2="{py(t):.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{py(t) + 4:.2f}" text-anchor="end" '
                   f'font-size="11">{t:g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 10}" '
               f'text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
               f'font-size="12" transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">'
               f'{escape(ylabel)}</text>')
    if truth is not None:
        out.append(f'<path id="truth" d="M{MARGIN["left"]},{py(truth):.2f} '
                   f'L{MARGIN["left"] + pw},{py(truth):.2f}" stroke="#c00" '
                   'stroke-dasharray="6,4" fill="none"/>')
    out.append(f'<path id="estimate" d="{" ".join(parts)}" stroke="#036" '
               'stroke-width="1.5" fill="none"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def parse_path(d: str):
    """Points of an SVG path written by :func:`line_chart_svg` as (x, y) pixels."""
    pts = []
    for token in d.split():
        xs, ys = token[1:].split(",")
        pts.append((float(xs), float(ys)))
    return pts
