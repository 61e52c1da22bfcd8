"""Minimal native SVG line and scatter charts.

Plots are diagnostics; the CSV files are the data contract. Output is
deterministic except for the single ``generated`` comment line.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=150, top=40, bottom=50)


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    style: str = "line"  # or "points"


@dataclass
class Panel:
    title: str
    series: list[Series] = field(default_factory=list)
    xlabel: str = ""
    ylabel: str = ""
    logx: bool = False
    logy: bool = False
    diagonal: bool = False  # draw y = x


def _fmt(v: float) -> str:
    return f"{v:.1f}"


def _tick_label(v: float, log: bool) -> str:
    if log:
        return f"1e{int(round(v))}"
    return f"{v:.4g}"


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [float(k) for k in range(math.floor(lo), math.ceil(hi) + 1) if lo <= k <= hi]
    return list(np.linspace(lo, hi, 5))


def _bounds(values: list[np.ndarray]) -> tuple[float, float]:
    vals = np.concatenate(values) if values else np.zeros(1)
    vals = vals[np.isfinite(vals)]
    if len(vals) == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _panel_svg(panel: Panel, y0: int) -> list[str]:
    left, right, top, bottom = MARGIN["left"], MARGIN["right"], MARGIN["top"], MARGIN["bottom"]
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom

    def tx(v, log):
        v = np.asarray(v, dtype=float)
        if log:
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(v > 0, np.log10(np.where(v > 0, v, 1.0)), np.nan)
        return v

    xs = [tx(s.x, panel.logx) for s in panel.series]
    ys = [tx(s.y, panel.logy) for s in panel.series]
    x_lo, x_hi = _bounds(xs)
    y_lo, y_hi = _bounds(ys)
    if panel.diagonal:
        x_lo = y_lo = min(x_lo, y_lo)
        x_hi = y_hi = max(x_hi, y_hi)

    def px(v):
        return left + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return y0 + top + ph - (v - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<text x="{WIDTH / 2:.0f}" y="{y0 + 24}" text-anchor="middle" font-size="15">{escape(panel.title)}</text>',
        f'<rect x="{left}" y="{y0 + top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    for t in _ticks(x_lo, x_hi, panel.logx):
        out.append(f'<text x="{_fmt(px(t))}" y="{y0 + top + ph + 16}" text-anchor="middle" '
                   f'font-size="10">{_tick_label(t, panel.logx)}</text>')
    for t in _ticks(y_lo, y_hi, panel.logy):
        out.append(f'<text x="{left - 6}" y="{_fmt(py(t) + 3)}" text-anchor="end" '
                   f'font-size="10">{_tick_label(t, panel.logy)}</text>')
    out.append(f'<text x="{left + pw / 2:.0f}" y="{y0 + HEIGHT - 10}" text-anchor="middle" '
               f'font-size="12">{escape(panel.xlabel)}</text>')
    out.append(f'<text x="16" y="{y0 + top + ph / 2:.0f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {y0 + top + ph / 2:.0f})">{escape(panel.ylabel)}</text>')
    if panel.diagonal:
        out.append(f'<line x1="{_fmt(px(x_lo))}" y1="{_fmt(py(x_lo))}" x2="{_fmt(px(x_hi))}" '
                   f'y2="{_fmt(py(x_hi))}" stroke="#999" stroke-dasharray="4 3"/>')
    for k, (s, x, y) in enumerate(zip(panel.series, xs, ys)):
        color = PALETTE[k % len(PALETTE)]
        ok = np.isfinite(x) & np.isfinite(y)
        pts = [(px(a), py(b)) for a, b in zip(x[ok], y[ok])]
        if s.style == "points":
            out.extend(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3" fill="{color}"/>' for a, b in pts)
        elif pts:
            d = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{d}"/>')
        ly = y0 + top + 14 + 16 * k
        out.append(f'<rect x="{left + pw + 10}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{left + pw + 24}" y="{ly + 1}" font-size="11">{escape(s.label)}</text>')
    return out


def render(panels: Sequence[Panel], manifest_hash: str = "", generated: str | None = None) -> str:
    """SVG document with the panels stacked vertically."""
    if generated is None:
        generated = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    height = HEIGHT * max(1, len(panels))
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">',
        f"<!-- manifest {manifest_hash} -->",
        f"<!-- generated {generated} -->",
        f'<rect width="{WIDTH}" height="{height}" fill="white"/>',
    ]
    for i, panel in enumerate(panels):
        lines.extend(_panel_svg(panel, i * HEIGHT))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
