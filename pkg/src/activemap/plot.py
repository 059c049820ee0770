"""Dependency-free SVG learning-curve plots."""

from __future__ import annotations

import os
from xml.sax.saxutils import escape

import numpy as np

from activemap.trainer import read_curve, smooth_curve

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 16, 32, 48


def _scale(values, lo, hi, out_lo, out_hi):
    if hi == lo:
        return np.full(len(values), (out_lo + out_hi) / 2.0)
    return out_lo + (np.asarray(values, float) - lo) * (out_hi - out_lo) / (hi - lo)


def curve_coordinates(episodes, rewards, y_range=None):
    """Pixel coordinates of a series; larger rewards map to smaller y."""
    x = _scale(episodes, min(episodes), max(episodes), MARGIN_L, WIDTH - MARGIN_R)
    lo, hi = y_range if y_range is not None else (min(rewards), max(rewards))
    y = _scale(rewards, lo, hi, HEIGHT - MARGIN_B, MARGIN_T)
    return x, y


def _polyline(x, y, color, width):
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
    return f'<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{pts}"/>'


def render_svg(episodes, rewards, kernel_width: float = 50.0,
               title: str = "Episode reward") -> str:
    episodes = np.asarray(episodes, float)
    rewards = np.asarray(rewards, float)
    if rewards.size == 0:
        raise ValueError("curve is empty")
    smooth = smooth_curve(rewards, kernel_width)
    lo, hi = float(rewards.min()), float(rewards.max())
    xr, yr = curve_coordinates(episodes, rewards, (lo, hi))
    xs, ys = curve_coordinates(episodes, smooth, (lo, hi))
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = HEIGHT - MARGIN_B, MARGIN_T
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        _polyline(xr, yr, "#9ecae1", 1),
        _polyline(xs, ys, "#08519c", 2),
        f'<text x="{(x0 + x1) / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="12">training episode</text>',
        f'<text x="16" y="{(y0 + y1) / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {(y0 + y1) / 2:.0f})">episode reward (nats)</text>',
        f'<text x="{x0}" y="{y0 + 16}" font-size="10">{episodes.min():g}</text>',
        f'<text x="{x1}" y="{y0 + 16}" font-size="10" text-anchor="end">{episodes.max():g}</text>',
        f'<text x="{x0 - 4}" y="{y0}" font-size="10" text-anchor="end">{lo:.1f}</text>',
        f'<text x="{x0 - 4}" y="{y1 + 4}" font-size="10" text-anchor="end">{hi:.1f}</text>',
        f'<text x="{(x0 + x1) / 2:.0f}" y="20" text-anchor="middle" font-size="14">'
        f'{escape(title)} (Gaussian sigma={kernel_width:g})</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def emit_curve_svg(curve_path, output_path, kernel_width: float = 50.0) -> None:
    """Render an ``episode,reward`` file; nothing is written on error."""
    episodes, rewards = read_curve(curve_path)
    svg = render_svg(episodes, rewards, kernel_width,
                     title=os.path.basename(os.fspath(curve_path)))
    with open(output_path, "w") as f:
        f.write(svg)
