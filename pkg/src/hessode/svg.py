"""Minimal hand-emitted SVG scatter/polyline plots (no plotting deps)."""

from __future__ import annotations

import numpy as np

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_tracks(tracks, markers=None, size=640, stroke_width=1.5,
                  marker_radius=3.0) -> str:
    """SVG document with one polyline per track and optional marker points.

    ``tracks``: sequence of (n, 2) arrays.  ``markers``: parallel sequence
    of (m, 2) arrays (may be None).  The viewBox fits all data with a 5%
    margin.
    """
    tracks = [np.asarray(t, dtype=float) for t in tracks]
    pts = np.vstack(tracks) if tracks else np.zeros((1, 2))
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    margin = 0.05 * float(np.max(span))
    lo -= margin
    hi += margin
    scale = size / float(np.max(hi - lo))

    def sx(x):
        return (x - lo[0]) * scale

    def sy(y):
        # SVG y grows downward
        return (hi[1] - y) * scale

    width = (hi[0] - lo[0]) * scale
    height = (hi[1] - lo[1]) * scale
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" '
           f'viewBox="0 0 {width:.2f} {height:.2f}" '
           f'width="{width:.0f}" height="{height:.0f}">',
           f'<rect width="{width:.2f}" height="{height:.2f}" fill="white"/>']
    for k, track in enumerate(tracks):
        color = _PALETTE[k % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.3f},{sy(y):.3f}" for x, y in track)
        out.append(f'<polyline points="{coords}" fill="none" '
                   f'stroke="{color}" stroke-width="{stroke_width}"/>')
        if markers is not None and markers[k] is not None:
            for x, y in np.asarray(markers[k], dtype=float):
                out.append(f'<circle cx="{sx(x):.3f}" cy="{sy(y):.3f}" '
                           f'r="{marker_radius}" fill="{color}" '
                           f'fill-opacity="0.6" stroke="none"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
