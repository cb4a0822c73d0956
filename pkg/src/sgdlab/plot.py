"""Minimal SVG rendering: the objective's graph with a trajectory overlaid."""
from __future__ import annotations

import json
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT, PAD = 720, 360, 40
START_COLOR = "#e75480"  # pink
END_COLOR = "#1f4fd8"    # blue


def trajectory_svg(f, rec, domain=(-2.0, 20.0), metadata=None, max_points=2000) -> str:
    lo, hi = domain
    grid = np.linspace(lo, hi, 1500)
    curve = f.evaluate_many(grid)
    xs = rec.x[:, 0]
    fs = rec.f_values
    inside = (xs >= lo) & (xs <= hi)
    if inside.sum() > max_points:
        idx = np.flatnonzero(inside)
        keep = idx[np.linspace(0, len(idx) - 1, max_points).astype(int)]
    else:
        keep = np.flatnonzero(inside)

    y_lo = float(min(curve.min(), fs[keep].min() if len(keep) else curve.min()))
    y_hi = float(min(max(curve.max(), fs[keep].max() if len(keep) else curve.max()), curve.max() * 1.1 + 1))
    span = (y_hi - y_lo) or 1.0

    def sx(v):
        return PAD + (v - lo) / (hi - lo) * (WIDTH - 2 * PAD)

    def sy(v):
        return HEIGHT - PAD - (min(v, y_hi) - y_lo) / span * (HEIGHT - 2 * PAD)

    path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(grid, curve))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
    ]
    if metadata is not None:
        parts.append(f"<metadata>{escape(json.dumps(metadata, sort_keys=True))}</metadata>")
    parts += [
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="#999"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="#999"/>',
        f'<polyline fill="none" stroke="black" stroke-width="1.5" points="{path}"/>',
    ]
    for i in keep:
        parts.append(f'<circle cx="{sx(xs[i]):.2f}" cy="{sy(fs[i]):.2f}" r="1.5" fill="#888" fill-opacity="0.5"/>')
    for i, color in ((0, START_COLOR), (len(xs) - 1, END_COLOR)):
        if lo <= xs[i] <= hi:
            parts.append(f'<circle cx="{sx(xs[i]):.2f}" cy="{sy(fs[i]):.2f}" r="5" fill="{color}"/>')
    for tick in range(int(np.ceil(lo)), int(np.floor(hi)) + 1, 2):
        parts.append(f'<text x="{sx(tick):.1f}" y="{HEIGHT - PAD + 15}" font-size="10" '
                     f'text-anchor="middle">{tick}</text>')
    parts.append(f'<text x="{WIDTH / 2}" y="20" font-size="12" text-anchor="middle">'
                 f'{escape(f.name)}: start x0 = {xs[0]:.6g}, end x = {xs[-1]:.6g} after k = {rec.final_k}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
