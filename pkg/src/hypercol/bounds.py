"""Quantitative bounds for the Boolean model in H^n.

Covers the two critical-intensity bounds, the drift functions ``f`` and
``g`` of the radial random walk, the elliptic-integral formula for
``E[exp(-Y/2)]``, the dominating function ``h(R, eps)``, the Chernoff bound
on short chains, the tail series for long ball chains and the radius
certificate for non-uniqueness.  Monte Carlo counterparts (branching
process, walk domination) live at the bottom of the module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from hypercol import geometry, sampling
from hypercol.stats import Estimate

#: Exponent used in the Markov step ``P[S < c] <= e^{s c} E[e^{-s Y}]^k``.
MARKOV_EXPONENT = 0.5
#: Inflation applied to the grid supremum that defines ``A_4(eps)``.
A4_INFLATION = 1.01
_MGF_RTOL = 1e-11


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > np.pi):
        raise ValueError("theta must lie in [0, pi]")
    return theta


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


# --------------------------------------------------------------------------
# drift functions

def _log_mix(x, theta, sign):
    """``log(sin^2(theta/2) + e^{-2x} cos^2(theta/2))`` (sign=1) or with
    sin and cos swapped (sign=-1), without underflow for large x."""
    half = np.asarray(theta, dtype=float) / 2.0
    a, b = (np.sin(half), np.cos(half)) if sign > 0 else (np.cos(half), np.sin(half))
    with np.errstate(divide="ignore"):
        return np.logaddexp(2.0 * np.log(np.abs(a)), -2.0 * x + 2.0 * np.log(np.abs(b)))

def g_value(x, theta):
    """Limit drift ``g(x, theta) = log(cosh x - sinh x cos theta)``.

    Computed as ``x + log(sin^2(theta/2) + e^{-2x} cos^2(theta/2))`` so the
    endpoints ``g(x, 0) = -x`` and ``g(x, pi) = x`` come out exact and large
    ``x`` does not overflow.
    """
    x = np.asarray(x, dtype=float)
    theta = _check_theta(theta)
    return _out(x + _log_mix(x, theta, 1.0))


def f_excess(x, y, theta):
    """``f(x, y, theta) - g(x, theta)``, accurate even when it is ~1e-30.

    With ``A = cosh x cosh y - sinh x sinh y cos theta`` one has
    ``f = log(A e^{-y} + sqrt((A e^{-y})^2 - e^{-2y}))`` and
    ``A e^{-y} = e^g (1 + u) / 2``, ``u = e^{-2y} (cosh x + sinh x cos theta) / e^g``.
    Both correction terms below are then plain ``log1p`` calls.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = _check_theta(theta)
    # a - b = e^x (s2 + e^{-2x} c2),  a + b = e^x (c2 + e^{-2x} s2)
    lo = _log_mix(x, theta, 1.0)
    log_u = -2.0 * y + _log_mix(x, theta, -1.0) - lo
    u = np.exp(log_u)
    g = x + lo
    log_p = g + np.log1p(u) - math.log(2.0)
    v = np.exp(-2.0 * y - 2.0 * log_p)
    v = np.minimum(v, 1.0)
    return _out(np.log1p(u) + np.log1p(-v / (2.0 * (1.0 + np.sqrt(1.0 - v)))))


def f_value(x, y, theta):
    """Radial increment ``f(x, y, theta) = d(0, X_{i+1}) - d(0, X_i)``.

    ``x`` is the step length, ``y`` the current distance from the origin and
    ``theta`` the angle between the step and the outward radial geodesic.
    Decreases strictly in ``y`` towards :func:`g_value`.
    """
    return _out(np.asarray(g_value(x, theta)) + np.asarray(f_excess(x, y, theta)))


# --------------------------------------------------------------------------
# elliptic integral and the moment E[exp(-Y/2)]

def agm(a, b, rtol: float = 1e-15):
    """Arithmetic-geometric mean, vectorised."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    for _ in range(64):
        if np.all(np.abs(a - b) <= rtol * np.abs(a)):
            break
        a, b = 0.5 * (a + b), np.sqrt(a * b)
    return _out(0.5 * (a + b))


def elliptic_K(k):
    """Complete elliptic integral of the first kind, modulus convention.

    ``K(k) = int_0^{pi/2} dt / sqrt(1 - k^2 sin^2 t) = pi / (2 agm(1, sqrt(1 - k^2)))``.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k < 0) or np.any(k >= 1):
        raise ValueError("modulus must lie in [0, 1)")
    kp = np.sqrt((1.0 - k) * (1.0 + k))
    return _out(np.pi / (2.0 * np.asarray(agm(1.0, kp))))


def mgf_given_d(d):
    """``E[exp(-Y/2) | step length d]`` for theta uniform on [0, pi].

    Equals ``(2/pi) e^{-d/2} K(sqrt(1 - e^{-2d}))``.  The complementary
    modulus is ``e^{-d}``, which is fed to the AGM directly.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("step length must be nonnegative")
    return _out(np.exp(-d / 2.0) / np.asarray(agm(1.0, np.exp(-d))))


def moment_given_d(d: float, s: float = MARKOV_EXPONENT) -> float:
    """``E[exp(-s Y) | d]``; the AGM closed form when s = 1/2, quadrature otherwise."""
    if s == 0.5:
        return float(mgf_given_d(d))
    if d < 0:
        raise ValueError("step length must be nonnegative")
    val, _ = integrate.quad(lambda th: math.exp(-s * g_value(d, th)), 0.0, math.pi,
                            epsabs=0.0, epsrel=_MGF_RTOL, limit=200)
    return val / math.pi


def _log_sinh(t: float) -> float:
    return t + math.log(-math.expm1(-2.0 * t)) - math.log(2.0)


def step_average(n: int, R: float, fn) -> float:
    """Average of ``fn(d)`` over the step length law, density ~ sinh^{n-1} on [0, 2R]."""
    n = geometry.check_dimension(n)
    if R <= 0:
        raise ValueError("R must be positive")
    top = 2.0 * R
    log_top = _log_sinh(top)

    def weight(t):
        if t <= 0.0:
            return 0.0
        return math.exp((n - 1) * (_log_sinh(t) - log_top))

    # the weight concentrates within O(1/(n-1)) of 2R
    pts = [max(top - 1.0, 0.5 * top)] if top > 2.0 else None
    num, _ = integrate.quad(lambda t: fn(t) * weight(t), 0.0, top, epsabs=0.0,
                            epsrel=_MGF_RTOL, limit=400, points=pts)
    den, _ = integrate.quad(weight, 0.0, top, epsabs=0.0, epsrel=_MGF_RTOL,
                            limit=400, points=pts)
    return num / den


@lru_cache(maxsize=4096)
def moment_expectation(n: int, R: float, s: float = MARKOV_EXPONENT) -> float:
    """``E[exp(-s Y)]`` with Y the drift of one uniform step of length <= 2R."""
    if s == 0.5:
        return step_average(n, R, lambda t: float(mgf_given_d(t)))
    return step_average(n, R, lambda t: moment_given_d(t, s))


def mgf_expectation(n: int, R: float) -> float:
    """Exact ``E[exp(-Y_1/2)]`` for the chain with ball radius R in H^n."""
    return moment_expectation(n, R, 0.5)


@lru_cache(maxsize=256)
def a4_constant(eps: float) -> float:
    """A realised ``A_4(eps)``: sup of ``mgf_given_d(d) e^{(1-eps) d/2}``, inflated 1%.

    The supremum is taken on a log-spaced grid; ``mgf_given_d(d) e^{d/2}``
    grows like ``d``, so the product peaks near ``d = 2/eps`` and the grid
    is extended past that point when eps is small.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    top = max(200.0, 20.0 / eps)
    grid = np.concatenate(([0.0], np.geomspace(1e-6, top, 20001)))
    vals = np.asarray(mgf_given_d(grid)) * np.exp((1.0 - eps) * grid / 2.0)
    return A4_INFLATION * float(vals.max())


def h_value(n: int, R: float, eps: float) -> float:
    """``h(R, eps) = A_4 E[exp(-(1-eps) d/2)]``, an upper bound for the exact moment."""
    a4 = a4_constant(eps)
    return a4 * step_average(n, R, lambda t: math.exp(-t * (1.0 - eps) / 2.0))


def chernoff_chain_bound(n: int, R: float, k: int, s: float = MARKOV_EXPONENT) -> float:
    """Markov bound ``P[Y_1 + ... + Y_k < 2R] <= e^{2Rs} E[e^{-sY}]^k``, clamped to 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    log_b = 2.0 * R * s + k * math.log(moment_expectation(n, R, s))
    return min(1.0, math.exp(log_b))


# --------------------------------------------------------------------------
# critical intensity bounds

def lambda_lower(n: int, R: float) -> float:
    """Lower bound on lambda_c: ``1 / mu(S(0, 2R))``."""
    if R <= 0:
        raise ValueError("R must be positive")
    return 1.0 / geometry.ball_volume(n, 2.0 * R)


def lambda_upper(n: int, R: float) -> float:
    """Upper bound on lambda_c from the branching construction: ``log 2 / mu(cell)``."""
    return math.log(2.0) / geometry.cell_volume(n, R)


def sqrt_trick_bound(p_union: float, m: int) -> float:
    """Lower bound on P[A_1] for m increasing events of equal probability."""
    if not 0.0 <= p_union <= 1.0:
        raise ValueError("p_union must lie in [0, 1]")
    if m < 1:
        raise ValueError("m must be a positive integer")
    return 1.0 - (1.0 - p_union) ** (1.0 / m)


@dataclass
class BoundsReport:
    n: int
    R: float
    mu_2R: float
    mu_cell: float
    lambda_lower: float
    lambda_upper: float
    mgf: float
    h_eps: dict = field(default_factory=dict)
    a4: dict = field(default_factory=dict)


def bounds_report(n: int, R: float, eps=(0.1, 0.3)) -> BoundsReport:
    mu_2r = geometry.ball_volume(n, 2.0 * R)
    mu_cell = geometry.cell_volume(n, R)
    return BoundsReport(
        n=n, R=R, mu_2R=mu_2r, mu_cell=mu_cell,
        lambda_lower=1.0 / mu_2r, lambda_upper=math.log(2.0) / mu_cell,
        mgf=mgf_expectation(n, R),
        h_eps={e: h_value(n, R, e) for e in eps},
        a4={e: a4_constant(e) for e in eps},
    )


# --------------------------------------------------------------------------
# long chains and non-uniqueness

def series_ratio(lam: float, n: int, R: float, s: float = MARKOV_EXPONENT) -> float:
    """Common ratio ``q = lam mu(S(0,2R)) E[e^{-sY}]`` of the chain tail series."""
    return lam * geometry.ball_volume(n, 2.0 * R) * moment_expectation(n, R, s)


def chain_tail_series(lam: float, n: int, R: float, k: int, s: float = MARKOV_EXPONENT) -> float:
    """Bound on the expected number of chains of length >= 2k that return within 2R.

    Sums ``(lam mu)^l e^{2Rs} M^{l-1}`` over ``l >= 2k`` with ``M = E[e^{-sY}]``;
    returns ``inf`` when the ratio ``q = lam mu M`` is at least 1.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if lam < 0:
        raise ValueError("intensity must be nonnegative")
    if lam == 0:
        return 0.0
    mu = geometry.ball_volume(n, 2.0 * R)
    m = moment_expectation(n, R, s)
    q = lam * mu * m
    if q >= 1.0:
        return math.inf
    log_v = 2.0 * R * s + 2 * k * math.log(lam * mu) + (2 * k - 1) * math.log(m) - math.log1p(-q)
    return math.exp(log_v)


@dataclass(frozen=True)
class Certificate:
    n: int
    t: float
    R: float
    lam: float
    q: float

    @property
    def margin(self) -> float:
        return 1.0 - self.q


def nonuniqueness_certificate(n: int, t: float, radii=None) -> Certificate | None:
    """Smallest R on the grid with ``q(t lambda_upper(n, R), R) < 1``.

    At such R the chain series converges, so two-point connection
    probabilities decay at intensity ``t * lambda_upper`` although that
    intensity exceeds lambda_c.  Returns None if no grid point qualifies.
    """
    if t <= 1:
        raise ValueError("t must exceed 1")
    if radii is None:
        radii = np.arange(1.0, 40.0 + 1e-9, 0.25)
    for R in radii:
        R = float(R)
        lam = t * lambda_upper(n, R)
        q = series_ratio(lam, n, R)
        if q < 1.0:
            return Certificate(n=n, t=t, R=R, lam=lam, q=q)
    return None


# --------------------------------------------------------------------------
# Monte Carlo counterparts

#: Population cap for the branching simulation; an alive line this large
#: has no realistic chance of dying out.
GW_POPULATION_CAP = 2 ** 40


def gw_survival_p(p: float, generations: int, trials: int, rng: np.random.Generator) -> Estimate:
    """Survival frequency of the cell branching process with occupation probability p.

    The root has 3 candidate cells, every later individual 2, so generation
    sizes follow ``Z_1 ~ Bin(3, p)``, ``Z_{g+1} ~ Bin(2 Z_g, p)``.
    """
    if generations < 1:
        raise ValueError("generations must be >= 1")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    z = rng.binomial(3, p, size=trials).astype(np.int64)
    for _ in range(generations - 1):
        z = rng.binomial(np.minimum(2 * z, GW_POPULATION_CAP), p).astype(np.int64)
    return Estimate.from_samples(z > 0)


def gw_survival(lam: float, n: int, R: float, generations: int, trials: int, seed: int) -> Estimate:
    if lam < 0:
        raise ValueError("intensity must be nonnegative")
    p = -math.expm1(-lam * geometry.cell_volume(n, R))
    return gw_survival_p(p, generations, trials, sampling.stream(seed, 0))


@dataclass(frozen=True)
class DominationResult:
    k: int
    p_walk: float
    p_sum: float
    margin: float
    stderr: float


def walk_domination_check(n: int, R: float, k: int, trials: int, seed: int) -> DominationResult:
    """Compare ``P[d(X_0, X_k) <= 2R]`` with ``P[Y_1 + ... + Y_{k-1} <= 2R]``.

    Both sides come from the same chains, so the margin is a paired z-score
    of ``p_sum - p_walk``.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    return walk_domination_table(n, R, [k], trials, seed)[0]


def walk_domination_table(n: int, R: float, ks, trials: int, seed: int) -> list[DominationResult]:
    ks = [int(k) for k in ks]
    if min(ks) < 2:
        raise ValueError("k must be >= 2")
    chains = sampling.sample_chains(n, R, max(ks), trials, sampling.stream(seed, 0))
    ysum = np.cumsum(chains.y_values, axis=1)
    out = []
    for k in ks:
        walk = chains.dist_from_origin[:, k - 1] <= 2.0 * R
        partial = ysum[:, k - 1] - chains.y_values[:, 0]
        summ = partial <= 2.0 * R
        diff = summ.astype(float) - walk.astype(float)
        se = float(diff.std(ddof=1) / math.sqrt(trials))
        mean = float(diff.mean())
        margin = mean / se if se > 0 else (0.0 if mean == 0 else math.copysign(math.inf, mean))
        out.append(DominationResult(k, float(walk.mean()), float(summ.mean()), margin, se))
    return out


def chain_sum_probability(n: int, R: float, ks, trials: int, seed: int) -> dict[int, Estimate]:
    """Monte Carlo ``P[Y_1 + ... + Y_k < 2R]`` for each k, from one batch of chains."""
    ks = [int(k) for k in ks]
    ys = sampling.sample_Y(n, R, sampling.stream(seed, 1), size=(trials, max(ks)))
    csum = np.cumsum(ys, axis=1)
    return {k: Estimate.from_samples(csum[:, k - 1] < 2.0 * R) for k in ks}
