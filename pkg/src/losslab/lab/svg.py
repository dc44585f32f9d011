"""Minimal deterministic SVG charts (bars and polylines).

Written by hand so that the output bytes depend only on the data: numbers
are printed with fixed precision and elements appear in data order.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=40, bottom=50)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _f(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    def __init__(self, xlo, xhi, ylo, yhi):
        if not xhi > xlo:
            xhi = xlo + 1.0
        if not yhi > ylo:
            yhi = ylo + 1.0
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi
        self.x0 = MARGIN["left"]
        self.x1 = WIDTH - MARGIN["right"]
        self.y0 = HEIGHT - MARGIN["bottom"]
        self.y1 = MARGIN["top"]

    def x(self, v):
        return self.x0 + (v - self.xlo) / (self.xhi - self.xlo) * (self.x1 - self.x0)

    def y(self, v):
        return self.y0 - (v - self.ylo) / (self.yhi - self.ylo) * (self.y0 - self.y1)


def _header(title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]


def _axes(fr: _Frame, xlabel: str, ylabel: str) -> list[str]:
    out = [
        f'<line x1="{_f(fr.x0)}" y1="{_f(fr.y0)}" x2="{_f(fr.x1)}" y2="{_f(fr.y0)}" stroke="black"/>',
        f'<line x1="{_f(fr.x0)}" y1="{_f(fr.y0)}" x2="{_f(fr.x0)}" y2="{_f(fr.y1)}" stroke="black"/>',
    ]
    for k in range(5):
        xv = fr.xlo + k * (fr.xhi - fr.xlo) / 4
        yv = fr.ylo + k * (fr.yhi - fr.ylo) / 4
        out.append(f'<text x="{_f(fr.x(xv))}" y="{_f(fr.y0 + 16)}" text-anchor="middle">{_tick(xv)}</text>')
        out.append(f'<text x="{_f(fr.x0 - 6)}" y="{_f(fr.y(yv) + 4)}" text-anchor="end">{_tick(yv)}</text>')
    out.append(f'<text x="{_f((fr.x0 + fr.x1) / 2)}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{_f((fr.y0 + fr.y1) / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_f((fr.y0 + fr.y1) / 2)})">{escape(ylabel)}</text>')
    return out


def _tick(v: float) -> str:
    if v != 0 and (abs(v) >= 1e4 or abs(v) < 1e-2):
        return f"{v:.2e}"
    return f"{v:.3g}"


def bar_chart(lefts, rights, heights, title: str, xlabel: str = "loss", ylabel: str = "count") -> str:
    lefts, rights, heights = list(lefts), list(rights), list(heights)
    xlo = min(lefts) if lefts else 0.0
    xhi = max(rights) if rights else 1.0
    fr = _Frame(xlo, xhi, 0.0, max(heights, default=0) or 1.0)
    out = _header(title) + _axes(fr, xlabel, ylabel)
    for lo, hi, h in zip(lefts, rights, heights):
        if h <= 0:
            continue
        x, w = fr.x(lo), max(fr.x(hi) - fr.x(lo), 0.5)
        y = fr.y(h)
        out.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(fr.y0 - y)}" fill="{PALETTE[0]}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_chart(x, series: dict, title: str, xlabel: str, ylabel: str = "") -> str:
    """One polyline per series; ``None`` or non-finite values break the line."""
    x = [float(v) for v in x]
    ys = [float(v) for vals in series.values() for v in vals if v is not None and math.isfinite(v)]
    fr = _Frame(min(x, default=0.0), max(x, default=1.0), min(ys, default=0.0), max(ys, default=1.0))
    out = _header(title) + _axes(fr, xlabel, ylabel)
    for k, (name, vals) in enumerate(series.items()):
        colour = PALETTE[k % len(PALETTE)]
        run: list[str] = []
        segments = []
        for xv, yv in zip(x, vals):
            if yv is None or not math.isfinite(yv):
                if run:
                    segments.append(run)
                run = []
                continue
            run.append(f"{_f(fr.x(xv))},{_f(fr.y(yv))}")
        if run:
            segments.append(run)
        for seg in segments:
            if len(seg) == 1:
                cx, cy = seg[0].split(",")
                out.append(f'<circle cx="{cx}" cy="{cy}" r="2" fill="{colour}"/>')
            else:
                out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{" ".join(seg)}"/>')
        ly = MARGIN["top"] + 14 * k + 6
        out.append(f'<text x="{WIDTH - MARGIN["right"] - 4}" y="{ly}" text-anchor="end" fill="{colour}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
