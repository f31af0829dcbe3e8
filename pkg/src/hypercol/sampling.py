"""Reproducible random generation.

Every random quantity is drawn from a stream keyed by ``(seed, trial)``
(numpy ``SeedSequence`` spawn keys), so trials can be run in any order or in
parallel and still reproduce bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hypercol import bounds, geometry


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError("seed must be a 64-bit nonnegative integer")
    if any(k < 0 for k in keys):
        raise ValueError("stream keys must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def poisson_count(mean: float, rng: np.random.Generator) -> int:
    """One Poisson variate.

    numpy uses inversion for small means and Hormann's transformed rejection
    (PTRS) for large ones.
    """
    if not math.isfinite(mean) or mean < 0:
        raise ValueError(f"Poisson mean must be finite and nonnegative, got {mean!r}")
    return int(rng.poisson(mean))


def random_directions(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` uniform unit vectors in R^n (normalised Gaussians)."""
    g = rng.standard_normal((size, n))
    norms = np.linalg.norm(g, axis=1)
    # a zero vector has probability 0; redraw defensively anyway
    while np.any(norms == 0):
        bad = norms == 0
        g[bad] = rng.standard_normal((int(bad.sum()), n))
        norms = np.linalg.norm(g, axis=1)
    return g / norms[:, None]


@dataclass(frozen=True)
class ModelParams:
    """Dimension, ball radius and intensity of one Boolean model."""

    n: int
    R: float
    lam: float

    def __post_init__(self):
        geometry.check_dimension(self.n)
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ValueError(f"ball radius must be positive, got {self.R!r}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"intensity must be nonnegative, got {self.lam!r}")

    def with_lam(self, lam: float) -> "ModelParams":
        return ModelParams(self.n, self.R, lam)


@dataclass
class Realization:
    """Poisson centres inside the window ``S(0, window_radius)``.

    Centres are kept in polar form (hyperbolic radius + unit direction);
    :attr:`centers` gives Poincare coordinates.
    """

    params: ModelParams
    window_radius: float
    radii: np.ndarray
    directions: np.ndarray
    seed: int = 0
    trial_index: int = 0

    @property
    def centers(self) -> np.ndarray:
        return geometry.from_polar(self.radii, self.directions)

    def __len__(self) -> int:
        return int(self.radii.shape[0])

    def subset(self, mask) -> "Realization":
        return Realization(self.params, self.window_radius, self.radii[mask],
                           self.directions[mask], self.seed, self.trial_index)

    def restrict(self, rho: float) -> "Realization":
        """Centres inside the smaller window ``S(0, rho)``."""
        if rho > self.window_radius:
            raise ValueError("can only restrict to a smaller window")
        r = self.subset(self.radii <= rho)
        r.window_radius = rho
        return r


def sample_realization_rng(params: ModelParams, rho: float, rng: np.random.Generator,
                           seed: int = 0, trial: int = 0) -> Realization:
    if not rho > 0:
        raise ValueError("window radius must be positive")
    n = params.n
    mean = params.lam * geometry.ball_volume(n, rho) if params.lam > 0 else 0.0
    count = poisson_count(mean, rng)
    u = rng.random(count)
    radii = np.asarray(geometry.radial_quantile(n, rho, u), dtype=float).reshape(count)
    dirs = random_directions(n, count, rng)
    return Realization(params, rho, radii, dirs, seed, trial)


def sample_realization(params: ModelParams, rho: float, seed: int, trial: int) -> Realization:
    """Poisson process of intensity ``params.lam`` in ``S(0, rho)``, keyed by (seed, trial)."""
    return sample_realization_rng(params, rho, stream(seed, trial), seed, trial)


# --------------------------------------------------------------------------
# the radial random walk

@dataclass
class WalkChain:
    n: int
    R: float
    steps: list = field(default_factory=list)          # (d_i, theta_i)
    dist_from_origin: list = field(default_factory=list)
    y_values: list = field(default_factory=list)


@dataclass
class ChainBatch:
    """Many walk chains at once; arrays have shape (chains, k)."""

    n: int
    R: float
    d: np.ndarray
    theta: np.ndarray
    dist_from_origin: np.ndarray
    y_values: np.ndarray

    def chain(self, i: int) -> WalkChain:
        return WalkChain(self.n, self.R,
                         list(zip(self.d[i].tolist(), self.theta[i].tolist())),
                         self.dist_from_origin[i].tolist(), self.y_values[i].tolist())


def sample_chains(n: int, R: float, k: int, size: int, rng: np.random.Generator) -> ChainBatch:
    """Sample ``size`` walks of ``k`` steps.

    Step lengths follow the radial law of ``S(0, 2R)``; the angles
    theta_1, theta_2, ... are uniform on [0, pi] and theta_0 = pi, so the
    first step moves straight out from the start point.
    """
    n = geometry.check_dimension(n)
    if k < 1:
        raise ValueError("k must be >= 1")
    if R <= 0:
        raise ValueError("R must be positive")
    d = np.asarray(geometry.radial_quantile(n, 2.0 * R, rng.random((size, k))), dtype=float)
    d = d.reshape(size, k)
    theta = rng.uniform(0.0, math.pi, (size, k))
    theta[:, 0] = math.pi
    dist = np.empty_like(d)
    dist[:, 0] = d[:, 0]
    for i in range(1, k):
        dist[:, i] = geometry.triangle_side(d[:, i], dist[:, i - 1], theta[:, i])
    y = np.asarray(bounds.g_value(d, theta), dtype=float).reshape(size, k)
    return ChainBatch(n, R, d, theta, dist, y)


def sample_chain(n: int, R: float, k: int, rng: np.random.Generator) -> WalkChain:
    return sample_chains(n, R, k, 1, rng).chain(0)


def sample_Y(n: int, R: float, rng: np.random.Generator, size=None, theta=None):
    """Draws of ``Y = g(d, theta)``; pass ``theta`` to pin the angle."""
    n = geometry.check_dimension(n)
    if R <= 0:
        raise ValueError("R must be positive")
    shape = () if size is None else size
    d = np.asarray(geometry.radial_quantile(n, 2.0 * R, rng.random(shape)), dtype=float)
    if theta is None:
        th = rng.uniform(0.0, math.pi, shape)
    else:
        th = np.full(np.shape(d), float(theta))
    y = bounds.g_value(d, th)
    return y
