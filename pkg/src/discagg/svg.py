"""SVG rendering of a cluster: discs colored by birth order plus the black hull outline."""
from __future__ import annotations

import colorsys

import numpy as np

from .geometry import RADIUS

MARGIN = 0.05
HUE_SPAN = 0.8  # red (oldest) through violet (newest)


def _fmt(v):
    return f"{v:.6f}".rstrip("0").rstrip(".") if v != 0 else "0"


def _color(t):
    r, g, b = colorsys.hsv_to_rgb(HUE_SPAN * t, 0.85, 0.95)
    return "#{:02x}{:02x}{:02x}".format(int(round(255 * r)), int(round(255 * g)), int(round(255 * b)))


def hull_path(vertices, radius=RADIUS):
    """SVG path data of the disc hull: circular arcs joined by tangent segments.

    ``vertices`` are the hull centers in CCW order. In SVG the y axis points
    down, so callers pass already flipped coordinates; the ring then runs in
    the negative SVG angle direction and every arc uses sweep flag 0.
    """
    V = np.asarray(vertices, dtype=float)
    k = len(V)
    if k == 1:
        x, y = V[0]
        return (f"M {_fmt(x + radius)} {_fmt(y)} A {_fmt(radius)} {_fmt(radius)} 0 1 0 "
                f"{_fmt(x - radius)} {_fmt(y)} A {_fmt(radius)} {_fmt(radius)} 0 1 0 "
                f"{_fmt(x + radius)} {_fmt(y)} Z")
    d = np.roll(V, -1, axis=0) - V
    L = np.hypot(d[:, 0], d[:, 1])
    # outward normal of each edge in the flipped frame
    nrm = np.column_stack([-d[:, 1], d[:, 0]]) / L[:, None]
    start = V + radius * nrm            # edge i leaves vertex i here
    end = np.roll(V, -1, axis=0) + radius * nrm
    parts = [f"M {_fmt(start[0, 0])} {_fmt(start[0, 1])}"]
    for i in range(k):
        j = (i + 1) % k
        parts.append(f"L {_fmt(end[i, 0])} {_fmt(end[i, 1])}")
        # convex corner: the arc spans the exterior angle, at most pi
        parts.append(f"A {_fmt(radius)} {_fmt(radius)} 0 0 0 "
                     f"{_fmt(start[j, 0])} {_fmt(start[j, 1])}")
    parts.append("Z")
    return " ".join(parts)


def render_svg(centers, birth=None, hull_vertices=None, radius=RADIUS, stroke=0.04) -> str:
    """SVG document with one circle per disc and the hull outline.

    ``birth`` (default: index order) sets the hue; ``hull_vertices`` are the
    extremal centers in CCW order.
    """
    C = np.asarray(centers, dtype=float).reshape(-1, 2)
    n = len(C)
    birth = np.arange(n) if birth is None else np.asarray(birth, dtype=float)
    span = max(float(birth.max() - birth.min()), 1.0) if n else 1.0
    hue = (birth - (birth.min() if n else 0)) / span
    F = C * np.array([1.0, -1.0])
    lo = F.min(axis=0) - radius
    hi = F.max(axis=0) + radius
    size = hi - lo
    pad = MARGIN * size
    vb = (lo[0] - pad[0], lo[1] - pad[1], size[0] + 2 * pad[0], size[1] + 2 * pad[1])
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="{" ".join(_fmt(v) for v in vb)}">',
        '<g stroke="none">',
    ]
    for (x, y), h in zip(F, hue):
        out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(radius)}" fill="{_color(h)}"/>')
    out.append("</g>")
    if hull_vertices is not None and len(hull_vertices):
        HV = np.asarray(hull_vertices, dtype=float).reshape(-1, 2) * np.array([1.0, -1.0])
        out.append(f'<path d="{hull_path(HV, radius)}" fill="none" stroke="#000000" '
                   f'stroke-width="{_fmt(stroke)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_record(record, checkpoint=None) -> str:
    """Render a finished run (or the discs present at a checkpoint index)."""
    if checkpoint is None:
        hull = record.final_hull()
        n = record.n_discs
    else:
        hull = record.hull_at(checkpoint)
        n = record.n_initial + int(record.checkpoint_steps[checkpoint])
    C = record.centers()[:n]
    return render_svg(C, np.arange(n), hull.vertices())
