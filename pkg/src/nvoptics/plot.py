"""Dependency-free SVG line/scatter plots with deterministic byte output."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


@dataclass(frozen=True)
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str = ""
    style: str = "line"  # "line" | "markers" | "dashed"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _tick_label(v: float, log: bool) -> str:
    if log:
        return f"1e{int(round(v))}"
    return f"{v:.6g}"


class _Axis:
    def __init__(self, values, log: bool, p0: float, p1: float):
        self.log = log
        v = np.asarray(values, dtype=float)
        if log:
            v = np.log10(v)
        lo, hi = float(v.min()), float(v.max())
        if hi == lo:
            pad = 0.5 if log else (abs(lo) * 0.1 or 1.0)
            lo, hi = lo - pad, hi + pad
        if log:
            lo, hi = math.floor(lo), math.ceil(hi)
        self.lo, self.hi, self.p0, self.p1 = lo, hi, p0, p1

    def map(self, v):
        v = np.asarray(v, dtype=float)
        if self.log:
            v = np.log10(v)
        return self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)

    def ticks(self):
        if self.log:
            return [float(k) for k in range(int(self.lo), int(self.hi) + 1)]
        return _nice_ticks(self.lo, self.hi)

    def tick_pos(self, t):
        return self.p0 + (t - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)


def render_svg(
    series: Sequence[Series],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    xlog: bool = False,
    ylog: bool = False,
    width: int = 640,
    height: int = 420,
) -> str:
    """Render series to an SVG document string.

    Raises ``ValueError`` for an empty series list, mismatched lengths or
    non-positive values on a log axis.
    """
    series = list(series)
    if not series:
        raise ValueError("emit_plot needs at least one series")
    for s in series:
        if len(s.x) != len(s.y) or len(s.x) == 0:
            raise ValueError(f"series {s.label!r} is empty or has mismatched x/y lengths")
        if not (np.all(np.isfinite(s.x)) and np.all(np.isfinite(s.y))):
            raise ValueError(f"series {s.label!r} contains non-finite values")
        if xlog and np.any(np.asarray(s.x) <= 0):
            raise ValueError("log x axis requires positive x values")
        if ylog and np.any(np.asarray(s.y) <= 0):
            raise ValueError("log y axis requires positive y values")

    left, right, top, bottom = 70.0, width - 20.0, 40.0, height - 55.0
    ax = _Axis(np.concatenate([np.asarray(s.x, float) for s in series]), xlog, left, right)
    ay = _Axis(np.concatenate([np.asarray(s.y, float) for s in series]), ylog, bottom, top)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{_fmt(width / 2)}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(
        f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(right - left)}" '
        f'height="{_fmt(bottom - top)}" fill="none" stroke="black"/>'
    )
    for t in ax.ticks():
        px = _fmt(ax.tick_pos(t))
        out.append(f'<line x1="{px}" y1="{_fmt(bottom)}" x2="{px}" y2="{_fmt(bottom + 5)}" stroke="black"/>')
        out.append(f'<text x="{px}" y="{_fmt(bottom + 18)}" text-anchor="middle">{escape(_tick_label(t, xlog))}</text>')
    for t in ay.ticks():
        py = _fmt(ay.tick_pos(t))
        out.append(f'<line x1="{_fmt(left - 5)}" y1="{py}" x2="{_fmt(left)}" y2="{py}" stroke="black"/>')
        out.append(f'<text x="{_fmt(left - 8)}" y="{py}" text-anchor="end" dominant-baseline="middle">{escape(_tick_label(t, ylog))}</text>')
    if xlabel:
        out.append(f'<text x="{_fmt((left + right) / 2)}" y="{_fmt(height - 12)}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        cy = _fmt((top + bottom) / 2)
        out.append(f'<text x="16" y="{cy}" text-anchor="middle" transform="rotate(-90 16 {cy})">{escape(ylabel)}</text>')

    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        xs, ys = ax.map(s.x), ay.map(s.y)
        if s.style == "markers":
            out.append(f'<g fill="{color}">')
            for px, py in zip(xs, ys):
                out.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3"/>')
            out.append("</g>")
        else:
            dash = ' stroke-dasharray="6 4"' if s.style == "dashed" else ""
            pts = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in zip(xs, ys))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>')
        if s.label:
            ly = top + 14 + 14 * i
            out.append(f'<text x="{_fmt(right - 8)}" y="{_fmt(ly)}" text-anchor="end" fill="{color}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(series: Sequence[Series], path, **kwargs) -> str:
    """Write :func:`render_svg` output to ``path`` and return the text."""
    text = render_svg(series, **kwargs)
    Path(path).write_text(text, encoding="utf-8")
    return text
