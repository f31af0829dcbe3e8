import math
import re

import numpy as np
import pytest

from hypercol import geometry, render, sampling
from hypercol.percolation import build_clusters
from hypercol.sampling import ModelParams, Realization


def test_euclidean_circle_matches_hyperbolic_ball():
    r, R = 2.0, 0.7
    u = np.array([0.6, 0.8])
    centre, rad = render.euclidean_circle(r, u, R)
    # points on the Euclidean circle are at hyperbolic distance R from the centre
    x = geometry.from_polar(r, u)
    for phi in np.linspace(0, 2 * math.pi, 13):
        p = centre + rad * np.array([math.cos(phi), math.sin(phi)])
        assert geometry.distance(p, x) == pytest.approx(R, abs=1e-10)


def test_euclidean_circle_at_origin():
    centre, rad = render.euclidean_circle(0.0, np.array([1.0, 0.0]), 1.0)
    assert np.allclose(centre, 0.0)
    assert rad == pytest.approx(math.tanh(0.5))


def test_render_svg_structure():
    real = sampling.sample_realization(ModelParams(2, 0.5, 0.2), 4.0, seed=1, trial=0)
    clusters = build_clusters(real)
    svg = render.render_svg(real, clusters)
    assert svg.count("<circle") == len(real) + 2
    radii = [float(m) for m in re.findall(r'<circle [^>]*r="([0-9.]+)" fill="#', svg)]
    assert len(radii) == len(real)
    assert max(radii) < render.VIEWPORT / 2


def test_render_rejects_three_dimensions():
    real = Realization(ModelParams(3, 1.0, 0.1), 2.0, np.zeros(0), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        render.render_svg(real)
