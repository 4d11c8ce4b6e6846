"""Minimal SVG 1.1 line plots: one polyline per series."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ["#1f4e9c", "#2a7fb8", "#2aa198", "#3c9d5d", "#7cb342", "#c0ca33", "#f9a825", "#ef6c00", "#c62828", "#6a1b9a"]

_W, _H = 640, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 150, 40, 50


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def line_plot(series: dict, path, title: str = "", xlabel: str = "", ylabel: str = "",
              log_y: bool = False) -> None:
    """``series`` maps a label to ``(xs, ys)``; non-positive values are dropped on a log axis."""
    cleaned = {}
    for label, (xs, ys) in series.items():
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if math.isfinite(float(y)) and (not log_y or float(y) > 0)]
        if pts:
            cleaned[label] = pts
    tf = (lambda v: math.log10(v)) if log_y else (lambda v: v)
    all_x = [p[0] for pts in cleaned.values() for p in pts] or [0.0, 1.0]
    all_y = [tf(p[1]) for pts in cleaned.values() for p in pts] or [0.0, 1.0]
    x0, x1 = min(all_x), max(all_x)
    y0, y1 = min(all_y), max(all_y)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def sx(v):
        return _LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return _TOP + ph - (tf(v) - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{_W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{_LEFT + pw / 2:.1f}" y="{_H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{_TOP + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_TOP + ph / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for xv in _ticks(x0, x1):
        px = _LEFT + (xv - x0) / (x1 - x0) * pw
        out.append(f'<line x1="{px:.2f}" y1="{_TOP + ph}" x2="{px:.2f}" y2="{_TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{_TOP + ph + 18}" text-anchor="middle">{xv:.4g}</text>')
    for yv in _ticks(y0, y1):
        py = _TOP + ph - (yv - y0) / (y1 - y0) * ph
        label = f"{10 ** yv:.3g}" if log_y else f"{yv:.4g}"
        out.append(f'<line x1="{_LEFT - 5}" y1="{py:.2f}" x2="{_LEFT}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{_LEFT - 8}" y="{py + 4:.2f}" text-anchor="end">{label}</text>')
    for k, (label, pts) in enumerate(cleaned.items()):
        color = PALETTE[k % len(PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = _TOP + 12 + 16 * k
        out.append(f'<line x1="{_W - _RIGHT + 10}" y1="{ly - 4}" x2="{_W - _RIGHT + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _RIGHT + 35}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
