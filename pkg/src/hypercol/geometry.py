"""Hyperbolic geometry in the Poincare ball model.

Points of H^n are stored as coordinate vectors in the open Euclidean unit
ball.  Everything the simulator needs is radial (windows are centred at the
origin), so this module offers distances, ball volumes, the radial law of a
uniform point in a ball, the hyperbolic law of cosines and the volume of the
sector cells used by the branching construction.

Functions that take radii or angles accept numpy arrays and broadcast;
scalar input gives a Python float back.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

#: Tolerance for clamping arccosh arguments (and squared chord terms) at 1.
ARCCOSH_TOL = 1e-12
#: Absolute / relative tolerances handed to the adaptive quadrature.
QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _scalar_or_array(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def check_dimension(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {n!r}")
    return int(n)


def acosh1p(t):
    """Return arccosh(1 + t) without losing accuracy for small ``t``.

    Negative ``t`` down to ``-ARCCOSH_TOL`` is treated as roundoff and
    clamped to zero.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < -ARCCOSH_TOL):
        raise ValueError("arccosh argument below 1")
    t = np.maximum(t, 0.0)
    return _scalar_or_array(np.log1p(t + np.sqrt(t * (t + 2.0))))


# --------------------------------------------------------------------------
# points

def as_point(coords) -> np.ndarray:
    """Validate and return a point of the Poincare ball as a float array."""
    x = np.asarray(coords, dtype=float)
    if x.ndim != 1:
        raise ValueError("a point is a 1-d coordinate vector")
    check_dimension(x.shape[0])
    if not np.all(np.isfinite(x)) or float(x @ x) >= 1.0:
        raise ValueError("point must lie strictly inside the unit ball")
    return x


def origin(n: int) -> np.ndarray:
    return np.zeros(check_dimension(n))


def from_polar(radius, direction) -> np.ndarray:
    """Point(s) at hyperbolic distance ``radius`` from 0 along unit ``direction``."""
    radius = np.asarray(radius, dtype=float)
    direction = np.asarray(direction, dtype=float)
    return np.tanh(radius / 2.0)[..., None] * direction


def hyperbolic_radius(x):
    """Hyperbolic distance from the origin, ``2 artanh |x|``."""
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(2.0 * np.arctanh(np.linalg.norm(x, axis=-1)))


def distance(x, y) -> float:
    """Hyperbolic distance between two points of the Poincare ball."""
    x = as_point(x)
    y = as_point(y)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    diff = x - y
    sx = float(x @ x)
    sy = float(y @ y)
    t = 2.0 * float(diff @ diff) / ((1.0 - sx) * (1.0 - sy))
    return acosh1p(t)


def distances_to(p, points) -> np.ndarray:
    """Vectorised :func:`distance` from one point to each row of ``points``."""
    p = np.asarray(p, dtype=float)
    points = np.asarray(points, dtype=float).reshape(-1, p.shape[0])
    diff = points - p
    sp = float(p @ p)
    sq = np.einsum("ij,ij->i", points, points)
    t = 2.0 * np.einsum("ij,ij->i", diff, diff) / ((1.0 - sp) * (1.0 - sq))
    return np.asarray(acosh1p(t), dtype=float).reshape(-1)


def polar_distance(r1, u1, r2, u2):
    """Distance between points given as (hyperbolic radius, unit direction).

    Uses ``cosh d - 1 = 2 sinh^2((r1-r2)/2) + 2 sinh r1 sinh r2 sin^2(a/2)``
    with ``sin^2(a/2) = |u1-u2|^2 / 4``, which stays accurate near the
    boundary of the ball where Poincare coordinates run out of digits.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    chord2 = np.sum((np.asarray(u1, dtype=float) - np.asarray(u2, dtype=float)) ** 2, axis=-1)
    t = 2.0 * np.sinh((r1 - r2) / 2.0) ** 2 + 0.5 * np.sinh(r1) * np.sinh(r2) * chord2
    return acosh1p(t)


# --------------------------------------------------------------------------
# volumes

def sphere_area(n: int) -> float:
    """Surface measure of the unit (n-1)-sphere in R^n (2*pi for n=2, 4*pi for n=3)."""
    n = check_dimension(n)
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def _sinh_minus_x(x):
    # sinh(x) - x without cancellation for small x
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.5
    xs = np.where(small, x, 0.0)
    series = np.zeros_like(xs)
    term = xs ** 3 / 6.0
    for k in range(2, 12):
        series = series + term
        term = term * xs * xs / ((2 * k) * (2 * k + 1))
    return np.where(small, series, np.sinh(x) - x)


def sinh_power_integral(m: int, r):
    """``int_0^r sinh(t)^m dt`` for integer m >= 0, vectorised over ``r``.

    Closed forms for m <= 2.  Higher powers use the reduction
    ``I_m = sinh^{m-1} cosh / m - (m-1)/m I_{m-2}`` for r >= 1 and a
    32-point Gauss-Legendre rule below that (the integrand is a near
    polynomial there).
    """
    r = np.asarray(r, dtype=float)
    if m == 0:
        return _scalar_or_array(r)
    if m == 1:
        return _scalar_or_array(2.0 * np.sinh(r / 2.0) ** 2)
    if m == 2:
        return _scalar_or_array(_sinh_minus_x(2.0 * r) / 4.0)
    shape = r.shape
    r = r.reshape(-1)
    big = r >= 1.0
    out = np.empty_like(r)
    if np.any(big):
        rb = r[big]
        lower = np.asarray(sinh_power_integral(m - 2, rb))
        out[big] = np.sinh(rb) ** (m - 1) * np.cosh(rb) / m - (m - 1) / m * lower
    if np.any(~big):
        rs = r[~big]
        half = rs[..., None] / 2.0
        nodes = half * (_GL_NODES + 1.0)
        out[~big] = np.sum(_GL_WEIGHTS * np.sinh(nodes) ** m, axis=-1) * half[..., 0]
    return _scalar_or_array(out.reshape(shape))


def ball_volume(n: int, r, method: str = "auto"):
    """Volume ``mu(S(0, r))`` of a hyperbolic ball in H^n.

    ``B(n) * int_0^r sinh(t)^(n-1) dt`` with ``B(n)`` the area of the unit
    Euclidean (n-1)-sphere.  ``method="auto"`` uses the closed forms for
    n = 2, 3 and adaptive quadrature otherwise; ``"quad"`` forces
    quadrature (used to cross-check the closed forms).
    """
    n = check_dimension(n)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or not np.all(np.isfinite(r_arr)):
        raise ValueError("radius must be finite and nonnegative")
    if method not in ("auto", "quad"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto" and n in (2, 3):
        return _scalar_or_array(sphere_area(n) * np.asarray(sinh_power_integral(n - 1, r_arr)))

    def one(radius):
        val, _ = integrate.quad(lambda t: math.sinh(t) ** (n - 1), 0.0, radius,
                                epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
        return sphere_area(n) * val

    return _scalar_or_array(np.vectorize(one, otypes=[float])(r_arr))


def annulus_ratio(n: int, r: float, eps: float) -> float:
    """Fraction of ``S(0, r)`` lying within ``eps`` of its boundary sphere."""
    if r <= 0 or eps <= 0:
        raise ValueError("r and eps must be positive")
    if eps >= r:
        return 1.0
    outer = ball_volume(n, r)
    return (outer - ball_volume(n, r - eps)) / outer


def circle_length(r):
    """Length of the boundary of ``S(0, r)`` in H^2."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("radius must be nonnegative")
    return _scalar_or_array(2.0 * np.pi * np.sinh(r_arr))


def cap_fraction(n: int, half_angle: float) -> float:
    """Fraction of the unit (n-1)-sphere within ``half_angle`` of a pole."""
    n = check_dimension(n)
    if not 0.0 <= half_angle <= math.pi:
        raise ValueError("half angle must lie in [0, pi]")
    if n == 2:
        return half_angle / math.pi
    if half_angle > math.pi / 2:
        return 1.0 - cap_fraction(n, math.pi - half_angle)
    return 0.5 * float(special.betainc((n - 1) / 2.0, 0.5, math.sin(half_angle) ** 2))


#: Half-angle of the cells of the branching construction.
CELL_HALF_ANGLE = math.pi / 6


def cell_volume(n: int, R: float) -> float:
    """Volume of one branching cell: the part of the shell
    ``S(0, 2R) minus S(0, 2R-1)`` within angle pi/6 of a fixed ray."""
    if 2 * R - 1 <= 0:
        raise ValueError("cells need 2R - 1 > 0")
    shell = ball_volume(n, 2 * R) - ball_volume(n, 2 * R - 1)
    return cap_fraction(n, CELL_HALF_ANGLE) * shell


# --------------------------------------------------------------------------
# triangles and radial laws

def triangle_side(a, b, gamma):
    """Third side of a hyperbolic triangle with sides ``a``, ``b`` enclosing ``gamma``.

    First law of cosines, ``cosh c = cosh a cosh b - sinh a sinh b cos gamma``,
    evaluated as ``cosh c - 1 = 2 sinh^2((a-b)/2) + 2 sinh a sinh b sin^2(gamma/2)``
    (and in log space once ``a + b`` is large enough to overflow cosh).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0) or np.any(gamma > np.pi):
        raise ValueError("angle must lie in [0, pi]")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("side lengths must be nonnegative")
    a, b, gamma = np.broadcast_arrays(a, b, gamma)
    s2 = np.sin(gamma / 2.0) ** 2
    huge = (a + b) > 600.0
    out = np.empty(a.shape, dtype=float)
    if np.any(~huge):
        aa, bb = a[~huge], b[~huge]
        t = 2.0 * np.sinh((aa - bb) / 2.0) ** 2 + 2.0 * np.sinh(aa) * np.sinh(bb) * s2[~huge]
        out[~huge] = acosh1p(t)
    if np.any(huge):
        aa, bb = a[huge], b[huge]
        ea, eb = np.exp(-2.0 * aa), np.exp(-2.0 * bb)
        log_x = aa + bb + np.log((ea + eb) / 2.0 + 0.5 * (1.0 - ea) * (1.0 - eb) * s2[huge])
        out[huge] = log_x + np.log1p(np.sqrt(-np.expm1(-2.0 * log_x)))
    return _scalar_or_array(out)


def radial_cdf(n: int, rho: float, r):
    """P[d(0, X) <= r] for X uniform (w.r.t. volume) in ``S(0, rho)``."""
    n = check_dimension(n)
    r = np.clip(np.asarray(r, dtype=float), 0.0, rho)
    return _scalar_or_array(np.asarray(sinh_power_integral(n - 1, r)) / sinh_power_integral(n - 1, rho))


def radial_quantile(n: int, rho: float, u):
    """Inverse of :func:`radial_cdf`.

    Closed form for n = 2, ``arccosh(1 + u (cosh rho - 1))``, written as
    ``2 asinh(sqrt(u) sinh(rho/2))``; bisection to 1e-12 otherwise.
    """
    n = check_dimension(n)
    if rho <= 0:
        raise ValueError("window radius must be positive")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > 1):
        raise ValueError("u must lie in [0, 1]")
    if n == 2:
        r = 2.0 * np.arcsinh(np.sqrt(u) * np.sinh(rho / 2.0))
        return _scalar_or_array(np.minimum(r, rho))
    total = sinh_power_integral(n - 1, rho)
    target = u * total
    lo = np.zeros_like(u)
    hi = np.full_like(u, rho)
    iters = int(math.ceil(math.log2(max(rho, 1e-300) / 1e-13))) + 1
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = np.asarray(sinh_power_integral(n - 1, mid)) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    r = 0.5 * (lo + hi)
    r = np.where(u == 0, 0.0, np.where(u == 1, rho, r))
    return _scalar_or_array(r)
