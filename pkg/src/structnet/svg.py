"""Standalone SVG line charts and heatmaps, no plotting library needed.

Line charts draw one ``<polyline>`` per series. Axes, ticks and legend
swatches use ``<line>`` and optional std bands use ``<polygon>``, so the
element counts stay predictable. Heatmaps draw exactly one ``<rect>`` per
cell.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import ValidationError

COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
          "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
DASHES = ("", "6,4", "2,3", "8,3,2,3")

WIDTH, HEIGHT = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 80, 180, 50, 60


def _escape(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.1e}"
    return f"{v:.3g}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def line_chart(series, title="", x_label="", y_label="", log_y=False, bands=None):
    """Render ``{label: (x, y)}`` as an SVG string.

    ``bands`` optionally maps a label to a std array drawn as a shaded
    region around that series.
    """
    if not series:
        raise ValidationError("no series to plot")
    clean = {}
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.shape != y.shape or x.ndim != 1 or x.size == 0:
            raise ValidationError(f"series {label!r}: columns must be equal-length and nonempty")
        clean[label] = (x, y)
    bands = bands or {}

    def tf(v):
        if not log_y:
            return v
        return np.log10(np.maximum(v, floor))

    ys = np.concatenate([y[np.isfinite(y)] for _, y in clean.values()] + [np.zeros(0)])
    for label, s in bands.items():
        y = clean[label][1]
        ys = np.concatenate([ys, (y + s)[np.isfinite(y + s)], (y - s)[np.isfinite(y - s)]])
    pos = ys[ys > 0]
    floor = pos.min() if pos.size else 1e-12
    xs = np.concatenate([x for x, _ in clean.values()])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    ty = tf(ys) if ys.size else np.array([0.0, 1.0])
    y_lo, y_hi = float(ty.min()), float(ty.max())
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return TOP + ph - (y - y_lo) / (y_hi - y_lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">']
    out.append(f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-size="16">'
               f'{_escape(title)}</text>')
    # axes and ticks
    out.append(f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="#333"/>')
    out.append(f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="#333"/>')
    for t in _ticks(x_lo, x_hi):
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{x:.2f}" y="{TOP + ph + 18}" text-anchor="middle" font-size="11">'
                   f'{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        label = _fmt(10 ** t) if log_y else _fmt(t)
        out.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="#333"/>')
        out.append(f'<line x1="{LEFT}" y1="{y:.2f}" x2="{LEFT + pw}" y2="{y:.2f}" stroke="#eee"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{label}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-size="13">{_escape(x_label)}</text>')
    y_title = y_label + (" (log)" if log_y else "")
    out.append(f'<text x="18" y="{TOP + ph / 2:.1f}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 18 {TOP + ph / 2:.1f})">{_escape(y_title)}</text>')

    for k, (label, (x, y)) in enumerate(clean.items()):
        color = COLORS[k % len(COLORS)]
        if label in bands:
            s = np.asarray(bands[label], dtype=np.float64)
            up = [f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, tf(y + s))]
            down = [f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[::-1], tf((y - s)[::-1]))]
            out.append(f'<polygon points="{" ".join(up + down)}" fill="{color}" '
                       f'fill-opacity="0.18" stroke="none"/>')
        finite = np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[finite], tf(y[finite])))
        dash = DASHES[k % len(DASHES)]
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="2"{dash_attr}/>')
        ly = TOP + 14 + 20 * k
        lx = LEFT + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"{dash_attr}/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}" font-size="12">{_escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _heat_color(t):
    # white -> dark blue
    t = min(max(t, 0.0), 1.0)
    r = int(round(255 * (1 - t) + 8 * t))
    g = int(round(255 * (1 - t) + 48 * t))
    b = int(round(255 * (1 - t) + 107 * t))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(matrix, title="", x_label="", y_label="", log_scale=False):
    """Render a ``rows x cols`` array as a grid of coloured cells."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValidationError("heatmap needs a nonempty 2-D array")
    vals = np.log10(np.maximum(m, 1e-300)) if log_scale else m
    finite = vals[np.isfinite(vals)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    rows, cols = m.shape
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    cw, ch = pw / cols, ph / rows
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">']
    out.append(f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-size="16">'
               f'{_escape(title)}</text>')
    for r in range(rows):
        for c in range(cols):
            v = vals[r, c]
            color = _heat_color((v - lo) / span) if math.isfinite(v) else "#ff00ff"
            out.append(f'<rect x="{LEFT + c * cw:.2f}" y="{TOP + r * ch:.2f}" width="{cw + 0.01:.2f}" '
                       f'height="{ch + 0.01:.2f}" fill="{color}"/>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-size="13">{_escape(x_label)}</text>')
    out.append(f'<text x="18" y="{TOP + ph / 2:.1f}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 18 {TOP + ph / 2:.1f})">{_escape(y_label)}</text>')
    # colour key as a stack of short lines
    kx = LEFT + pw + 30
    for i in range(50):
        y = TOP + ph - i * ph / 50
        out.append(f'<line x1="{kx}" y1="{y:.2f}" x2="{kx + 18}" y2="{y:.2f}" '
                   f'stroke="{_heat_color(i / 49)}" stroke-width="{ph / 50 + 0.5:.2f}"/>')
    suffix = " (log10)" if log_scale else ""
    out.append(f'<text x="{kx + 24}" y="{TOP + 10}" font-size="11">{_fmt(hi)}{suffix}</text>')
    out.append(f'<text x="{kx + 24}" y="{TOP + ph}" font-size="11">{_fmt(lo)}{suffix}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(series, mode="line", **style):
    """Dispatch to :func:`line_chart` (``series`` = ``{label: (x, y)}``) or
    :func:`heatmap` (``series`` = 2-D array)."""
    if mode == "line":
        return line_chart(series, **style)
    if mode == "heatmap":
        return heatmap(series, **style)
    raise ValidationError(f"unknown svg mode {mode!r}")


def write_svg(path, text):
    Path(path).write_text(text, encoding="utf-8")
