"""Deterministic SVG line charts and correlation heatmaps.

Output depends only on the inputs: fixed canvas, fixed number formatting, no
timestamps or random ids, so rendered files can be compared byte for byte.
"""

from __future__ import annotations

import math
from datetime import date
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 360
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 90, 24, 44, 64

POSITIVE = (178, 24, 43)
NEGATIVE = (33, 102, 172)


def _num(x: float) -> str:
    return f"{x:.2f}"


def _tick_label(x: float) -> str:
    if x == 0:
        return "0"
    if abs(x) >= 1e5 or abs(x) < 1e-3:
        return f"{x:.2e}"
    return f"{x:.4g}"


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick values covering ``[lo, hi]``."""
    span = hi - lo
    raw = span / max(target, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + step * 1e-9:
        ticks.append(0.0 if abs(t) < step * 1e-9 else t)
        t = first + len(ticks) * step
    return ticks


def _header(width: int, height: int, title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width / 2:.1f}" y="26" font-size="16" text-anchor="middle">{escape(title)}</text>',
    ]


def render_line_chart(dates: Sequence[date], values: Sequence[float], title: str,
                      x_label: str = "Date", y_label: str = "") -> bytes:
    """One time series as a polyline over a date axis.

    Non-finite values break the line instead of being drawn.
    """
    if not dates or len(dates) != len(values):
        raise ValueError("need a nonempty series with one value per date")
    vals = [float(v) if v is not None else math.nan for v in values]
    finite = [v for v in vals if math.isfinite(v)]
    lo, hi = (min(finite), max(finite)) if finite else (0.0, 1.0)
    if lo == hi:
        pad = abs(lo) * 0.5 or 1.0
        lo, hi = lo - pad, hi + pad
    ticks = nice_ticks(lo, hi)
    lo, hi = min(lo, ticks[0]), max(hi, ticks[-1])

    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = HEIGHT - MARGIN_B, MARGIN_T
    d0, d1 = dates[0].toordinal(), dates[-1].toordinal()

    def sx(d: date) -> float:
        if d1 == d0:
            return (x0 + x1) / 2
        return x0 + (d.toordinal() - d0) / (d1 - d0) * (x1 - x0)

    def sy(v: float) -> float:
        return y0 - (v - lo) / (hi - lo) * (y0 - y1)

    out = _header(WIDTH, HEIGHT, title)
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="#000000"/>')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="#000000"/>')
    for t in ticks:
        y = _num(sy(t))
        out.append(f'<line x1="{x0 - 5}" y1="{y}" x2="{x1}" y2="{y}" stroke="#dddddd"/>')
        out.append(f'<text x="{x0 - 8}" y="{y}" font-size="11" text-anchor="end" '
                   f'dominant-baseline="middle">{_tick_label(t)}</text>')
    n_xticks = min(6, len(set(dates)))
    if d1 == d0:
        xticks = [dates[0]]
    else:
        xticks = [date.fromordinal(d0 + round(i * (d1 - d0) / (n_xticks - 1))) for i in range(n_xticks)]
    for d in xticks:
        x = _num(sx(d))
        out.append(f'<line x1="{x}" y1="{y0}" x2="{x}" y2="{y0 + 5}" stroke="#000000"/>')
        out.append(f'<text x="{x}" y="{y0 + 18}" font-size="11" text-anchor="middle">{d.isoformat()}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 16}" font-size="13" '
               f'text-anchor="middle">{escape(x_label)}</text>')
    if y_label:
        cy = (y0 + y1) / 2
        out.append(f'<text x="18" y="{cy:.1f}" font-size="13" text-anchor="middle" '
                   f'transform="rotate(-90 18 {cy:.1f})">{escape(y_label)}</text>')

    runs, run = [], []
    for d, v in zip(dates, vals):
        if math.isfinite(v):
            run.append(f"{_num(sx(d))},{_num(sy(v))}")
        elif run:
            runs.append(run)
            run = []
    if run:
        runs.append(run)
    for r in runs:
        out.append(f'<polyline fill="none" stroke="#1f4e79" stroke-width="1.5" points="{" ".join(r)}"/>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")


def diverging_color(r: float) -> str:
    """White at 0, darkening toward red at +1 and blue at -1."""
    r = max(-1.0, min(1.0, r))
    base = POSITIVE if r >= 0 else NEGATIVE
    t = abs(r)
    rgb = [round(255 + (c - 255) * t) for c in base]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def render_heatmap(labels: Sequence[str], values, title: str = "Feature correlation") -> bytes:
    """Annotated square heatmap of a correlation matrix; undefined (NaN) cells are hatched."""
    n = len(labels)
    cell = 72
    left, top = 200, 60
    legend_w = 90
    width = left + n * cell + legend_w + 20
    height = top + n * cell + 150
    out = _header(width, height, title)
    out.append('<defs>')
    out.append('<pattern id="undefined" width="8" height="8" patternUnits="userSpaceOnUse" '
               'patternTransform="rotate(45)"><rect width="8" height="8" fill="#f2f2f2"/>'
               '<line x1="0" y1="0" x2="0" y2="8" stroke="#aaaaaa" stroke-width="2"/></pattern>')
    out.append('<linearGradient id="scale" x1="0" y1="1" x2="0" y2="0">')
    for i, r in enumerate((-1.0, -0.5, 0.0, 0.5, 1.0)):
        out.append(f'<stop offset="{i * 25}%" stop-color="{diverging_color(r)}"/>')
    out.append('</linearGradient>')
    out.append('</defs>')
    for i in range(n):
        for j in range(n):
            x, y = left + j * cell, top + i * cell
            r = float(values[i][j])
            if math.isfinite(r):
                out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                           f'fill="{diverging_color(r)}" stroke="#ffffff"/>')
                ink = "#ffffff" if abs(r) > 0.6 else "#000000"
                out.append(f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2:.1f}" font-size="13" '
                           f'text-anchor="middle" dominant-baseline="middle" fill="{ink}">{r:.2f}</text>')
            else:
                out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                           f'fill="url(#undefined)" stroke="#ffffff"/>')
    for i, lab in enumerate(labels):
        cy = top + i * cell + cell / 2
        out.append(f'<text x="{left - 8}" y="{cy:.1f}" font-size="12" text-anchor="end" '
                   f'dominant-baseline="middle">{escape(lab)}</text>')
        cx = left + i * cell + cell / 2
        ly = top + n * cell + 10
        out.append(f'<text x="{cx:.1f}" y="{ly}" font-size="12" text-anchor="end" '
                   f'transform="rotate(-45 {cx:.1f} {ly})">{escape(lab)}</text>')
    lx = left + n * cell + 30
    lh = n * cell
    out.append(f'<rect x="{lx}" y="{top}" width="18" height="{lh}" fill="url(#scale)" stroke="#000000"/>')
    for r in (-1.0, -0.5, 0.0, 0.5, 1.0):
        y = top + (1 - (r + 1) / 2) * lh
        out.append(f'<text x="{lx + 24}" y="{y:.1f}" font-size="11" dominant-baseline="middle">{r:.1f}</text>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
