"""Minimal self-contained SVG figures (axes, polylines, markers, heatmaps)."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f")
W, H = 640, 420
ML, MR, MT, MB = 70, 150, 40, 55


def _ticks(lo, hi, n=5):
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _fmt(v):
    return f"{v:.4g}"


class _Frame:
    def __init__(self, xlim, ylim, title, xlabel, ylabel):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
            'font-family="sans-serif" font-size="12">',
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]
        pw, ph = W - ML - MR, H - MT - MB
        self.parts.append(f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
        for t in _ticks(self.x0, self.x1):
            x = self.sx(t)
            self.parts.append(f'<line x1="{x:.2f}" y1="{MT + ph}" x2="{x:.2f}" y2="{MT + ph + 5}" stroke="black"/>')
            self.parts.append(f'<text x="{x:.2f}" y="{MT + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
        for t in _ticks(self.y0, self.y1):
            y = self.sy(t)
            self.parts.append(f'<line x1="{ML - 5}" y1="{y:.2f}" x2="{ML}" y2="{y:.2f}" stroke="black"/>')
            self.parts.append(f'<text x="{ML - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
        self.parts.append(f'<text x="{ML + pw / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
        self.parts.append(f'<text x="16" y="{MT + ph / 2:.1f}" text-anchor="middle" '
                          f'transform="rotate(-90 16 {MT + ph / 2:.1f})">{escape(ylabel)}</text>')
        self.legend = 0

    def sx(self, x):
        return ML + (x - self.x0) / (self.x1 - self.x0) * (W - ML - MR)

    def sy(self, y):
        return H - MB - (y - self.y0) / (self.y1 - self.y0) * (H - MT - MB)

    def add_legend(self, label, color, marker=False):
        y = MT + 12 + 18 * self.legend
        x = W - MR + 12
        if marker:
            self.parts.append(f'<circle cx="{x + 10}" cy="{y - 4}" r="3.5" fill="{color}"/>')
        else:
            self.parts.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 20}" y2="{y - 4}" stroke="{color}" stroke-width="2"/>')
        self.parts.append(f'<text x="{x + 26}" y="{y}">{escape(label)}</text>')
        self.legend += 1

    def polyline(self, x, y, color, dash=False):
        segs, cur = [], []
        for a, b in zip(x, y):
            if math.isfinite(a) and math.isfinite(b) and self.y0 <= b <= self.y1:
                cur.append(f"{self.sx(a):.2f},{self.sy(b):.2f}")
            elif cur:
                segs.append(cur)
                cur = []
        if cur:
            segs.append(cur)
        style = ' stroke-dasharray="5,4"' if dash else ""
        for seg in segs:
            self.parts.append(f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}" stroke-width="1.6"{style}/>')

    def markers(self, x, y, color):
        for a, b in zip(x, y):
            if math.isfinite(a) and math.isfinite(b) and self.y0 <= b <= self.y1:
                self.parts.append(f'<circle cx="{self.sx(a):.2f}" cy="{self.sy(b):.2f}" r="3" fill="{color}"/>')

    def text(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _limits(arrays, pad=0.05):
    vals = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays]) if arrays else np.zeros(1)
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    span = hi - lo or abs(hi) or 1.0
    return lo - pad * span, hi + pad * span


def line_plot(path, series, title="", xlabel="", ylabel="", ylim=None) -> Path:
    """``series``: iterable of dicts with keys x, y, label and optional style ("line", "dash", "points")."""
    series = list(series)
    xlim = _limits([s["x"] for s in series], 0.0)
    ylim = ylim or _limits([s["y"] for s in series])
    fr = _Frame(xlim, ylim, title, xlabel, ylabel)
    for n, s in enumerate(series):
        color = s.get("color", PALETTE[n % len(PALETTE)])
        style = s.get("style", "line")
        if style == "points":
            fr.markers(s["x"], s["y"], color)
        else:
            fr.polyline(s["x"], s["y"], color, dash=style == "dash")
        if s.get("label"):
            fr.add_legend(s["label"], color, style == "points")
    path = Path(path)
    path.write_text(fr.text())
    return path


def _color_scale(v):
    """White -> dark blue for v in [0, 1]."""
    v = min(max(v, 0.0), 1.0)
    r = int(round(255 * (1 - 0.85 * v)))
    g = int(round(255 * (1 - 0.6 * v)))
    b = int(round(255 * (1 - 0.25 * v)))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(path, matrix, x_values, y_values, title="", xlabel="", ylabel="") -> Path:
    """Cells matrix[iy, ix] placed on a regular grid, scaled to the matrix maximum."""
    m = np.asarray(matrix, dtype=float)
    top = np.nanmax(m) if m.size and np.nanmax(m) > 0 else 1.0
    xv, yv = np.asarray(x_values, float), np.asarray(y_values, float)
    dx = (xv[1] - xv[0]) if len(xv) > 1 else 1.0
    dy = (yv[1] - yv[0]) if len(yv) > 1 else 1.0
    fr = _Frame((xv[0] - dx / 2, xv[-1] + dx / 2), (yv[0] - dy / 2, yv[-1] + dy / 2), title, xlabel, ylabel)
    cells = []
    for iy, y in enumerate(yv):
        for ix, x in enumerate(xv):
            x0, x1 = fr.sx(x - dx / 2), fr.sx(x + dx / 2)
            y0, y1 = fr.sy(y + dy / 2), fr.sy(y - dy / 2)
            cells.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0:.2f}" height="{y1 - y0:.2f}" '
                         f'fill="{_color_scale(m[iy, ix] / top)}"/>')
    fr.parts[3:3] = cells
    fr.parts.append(f'<text x="{W - MR + 12}" y="{MT + 12}">max {_fmt(top)}</text>')
    path = Path(path)
    path.write_text(fr.text())
    return path
