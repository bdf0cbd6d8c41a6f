"""Plain SVG line chart of the empirical ellipse/ball rejection ratio."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

from ..exceptions import MalformedCSVError
from .tables import read_csv

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=130, top=30, bottom=50)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, k=5):
    step = (hi - lo) / (k - 1)
    return [lo + i * step for i in range(k)]


def plot_figure2(csv_path, svg_path=None):
    """Draw one polyline per ``n`` with ``x = tol`` and ``y = R_E/R_B``, plus a reference line at 1.

    Returns the SVG path.
    """
    header, rows = read_csv(csv_path)
    if header[:3] != ["tol", "n", "R_ratio"]:
        raise MalformedCSVError(f"{csv_path}: expected columns tol,n,R_ratio, got {','.join(header)}")
    if not rows:
        raise MalformedCSVError(f"{csv_path}: no data rows to plot")
    series = defaultdict(list)
    for tol, n, ratio in (r[:3] for r in rows):
        series[int(n)].append((tol, ratio))

    xs = [r[0] for r in rows]
    ys = [r[2] for r in rows] + [1.0]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    y0, y1 = min(0.0, min(ys)), max(ys) * 1.1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + (1 - (y - y0) / (y1 - y0)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for t in _ticks(x0, x1):
        parts.append(f'<text x="{sx(t):.1f}" y="{HEIGHT - MARGIN["bottom"] + 18}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        parts.append(f'<text x="{MARGIN["left"] - 8}" y="{sy(t) + 4:.1f}" text-anchor="end">{t:.2f}</text>')
    parts.append(f'<line x1="{sx(x0):.1f}" y1="{sy(1):.1f}" x2="{sx(x1):.1f}" y2="{sy(1):.1f}" '
                 f'stroke="#888" stroke-dasharray="6,4" class="reference"/>')
    for k, (n, pts) in enumerate(sorted(series.items())):
        pts.sort()
        color = COLORS[k % len(COLORS)]
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
        parts.append(f'<polyline class="series" data-n="{n}" points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>')
        ly = MARGIN["top"] + 20 * k + 10
        lx = WIDTH - MARGIN["right"] + 15
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(f"n = {n}")}</text>')
    parts.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">tolerance</text>')
    parts.append(f'<text x="16" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2})">R_E / R_B</text>')
    parts.append("</svg>")

    out = Path(svg_path) if svg_path is not None else Path(csv_path).with_suffix(".svg")
    out.write_text("\n".join(parts) + "\n")
    return out
