"""Static SVG figures: prediction fans over the occupancy map and the generator histogram."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def _polyline(points, to_px, colour, width=1.0, opacity=1.0, dash=None):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in (to_px(p) for p in points))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="{width}" '
            f'stroke-opacity="{opacity}"{extra}/>')


def fan_svg(grid, observations, ground_truth, predictions, generator_ids, scale=12.0, title=""):
    """Observed tracks, their ground-truth futures and predicted fans, coloured by generator.

    ``observations`` is (B, 8, 2), ``ground_truth`` a list of (n_i, 12, 2)
    sets and ``predictions`` (B, k, 12, 2) with matching ``generator_ids``.
    """
    h, w = grid.height, grid.width
    res = grid.resolution
    width_px, height_px = w * res * scale, h * res * scale

    def to_px(p):
        return p[0] * scale, height_px - p[1] * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px:.0f}" height="{height_px:.0f}" '
           f'viewBox="0 0 {width_px:.0f} {height_px:.0f}">',
           f'<rect width="{width_px:.0f}" height="{height_px:.0f}" fill="white"/>']
    if title:
        out.append(f'<title>{escape(title)}</title>')
    cell = res * scale
    for r, c in zip(*np.nonzero(grid.blocked)):
        x, y = c * cell, height_px - (r + 1) * cell
        out.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cell:.2f}" height="{cell:.2f}" fill="#bbbbbb"/>')
    for obs, gt, preds, ids in zip(observations, ground_truth, predictions, generator_ids):
        last = obs[-1]
        for fut in gt:
            out.append(_polyline(np.vstack([last, fut]), to_px, "#000000", 0.8, 0.25, "3,2"))
        for traj, g in zip(preds, ids):
            out.append(_polyline(np.vstack([last, traj]), to_px, PALETTE[int(g) % len(PALETTE)], 1.2, 0.7))
        out.append(_polyline(obs, to_px, "#000000", 2.0))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def pi_histogram_svg(pi, counts=None, width=360, height=220):
    """Bar chart of the mean generator probability, optionally annotated with sample counts."""
    pi = np.asarray(pi, dtype=float)
    n = len(pi)
    margin = 30
    bar_w = (width - 2 * margin) / max(n, 1)
    top = max(float(pi.max()) if n else 1.0, 1e-9)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" '
           'stroke="black"/>']
    for g, p in enumerate(pi):
        bh = (height - 2 * margin) * p / top
        x = margin + g * bar_w + 0.1 * bar_w
        y = height - margin - bh
        out.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{0.8 * bar_w:.2f}" height="{bh:.2f}" '
                   f'fill="{PALETTE[g % len(PALETTE)]}"/>')
        label = f"{p:.2f}" if counts is None else f"{p:.2f} ({int(counts[g])})"
        out.append(f'<text x="{x + 0.4 * bar_w:.2f}" y="{y - 4:.2f}" font-size="10" '
                   f'text-anchor="middle">{label}</text>')
        out.append(f'<text x="{x + 0.4 * bar_w:.2f}" y="{height - margin + 14}" font-size="10" '
                   f'text-anchor="middle">G{g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
