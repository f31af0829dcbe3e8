"""SVG drawings of H^2 realizations in the Poincare disk.

Hyperbolic circles are Euclidean circles in the disk model, so each ball
is emitted as a plain ``<circle>``.
"""

from __future__ import annotations

import math

import numpy as np

from hypercol.percolation import ClusterLabels, build_clusters
from hypercol.sampling import Realization

VIEWPORT = 1000
_PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
            "#e6ab02", "#a6761d", "#1f78b4", "#b2df8a", "#fb9a99")


def euclidean_circle(r: float, direction, R: float):
    """Euclidean centre and radius of the hyperbolic ball ``S(x, R)``.

    ``x`` sits at hyperbolic distance ``r`` from 0 along ``direction``.  The
    ball meets the diameter through x at signed Euclidean radii
    ``tanh((r - R)/2)`` and ``tanh((r + R)/2)``.
    """
    u = np.asarray(direction, dtype=float)
    near = math.tanh((r - R) / 2.0)
    far = math.tanh((r + R) / 2.0)
    return (near + far) / 2.0 * u, (far - near) / 2.0


def render_svg(real: Realization, clusters: ClusterLabels | None = None,
               size: int = VIEWPORT) -> str:
    if real.params.n != 2:
        raise ValueError("only H^2 realizations can be rendered")
    if clusters is None:
        clusters = build_clusters(real)
    half = size / 2.0
    scale = half * 0.98

    def xy(p):
        return half + scale * p[0], half - scale * p[1]

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<circle cx="{half:.3f}" cy="{half:.3f}" r="{scale:.3f}" fill="none" '
        f'stroke="black" stroke-width="1.5"/>',
    ]
    window = math.tanh(real.window_radius / 2.0) * scale
    out.append(f'<circle cx="{half:.3f}" cy="{half:.3f}" r="{window:.3f}" fill="none" '
               f'stroke="#999999" stroke-dasharray="4 4"/>')
    R = real.params.R
    for k in range(len(real)):
        centre, rad = euclidean_circle(float(real.radii[k]), real.directions[k], R)
        cx, cy = xy(centre)
        colour = _PALETTE[int(clusters.labels[k]) % len(_PALETTE)]
        out.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{rad * scale:.4f}" '
                   f'fill="{colour}" fill-opacity="0.35" stroke="{colour}" stroke-width="0.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
