"""Cluster structure of the covered region and finite-volume percolation proxies.

Two balls of radius R overlap iff their centres are within 2R, so the
connected components of the covered region inside a window are the
components of the graph ``{d(x_i, x_j) <= 2R}`` on the Poisson centres.
Unbounded components cannot be observed in a finite window; annulus
crossings stand in for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from hypercol import bounds, geometry, sampling
from hypercol.sampling import ModelParams, Realization
from hypercol.stats import Estimate

#: Slack on closed-ball tests ``d <= 2R`` and ``d <= R``.
BOUNDARY_TOL = 1e-12
#: Below this many centres all pairs are tested directly.
ALL_PAIRS_LIMIT = 2000


def _t_threshold(D: float) -> float:
    # d <= D  <=>  cosh d - 1 <= 2 sinh^2(D/2)
    return 2.0 * math.sinh((D + BOUNDARY_TOL) / 2.0) ** 2


def _polar_t(r1, u1, r2, u2):
    chord2 = np.sum((u1 - u2) ** 2, axis=-1)
    return 2.0 * np.sinh((r1 - r2) / 2.0) ** 2 + 0.5 * np.sinh(r1) * np.sinh(r2) * chord2


def _polar_of(p):
    p = geometry.as_point(p)
    norm = float(np.linalg.norm(p))
    if norm == 0.0:
        u = np.zeros_like(p)
        u[0] = 1.0
        return 0.0, u
    return 2.0 * math.atanh(norm), p / norm


class UnionFind:
    """Disjoint sets with union by rank and path halving."""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size
        self.count = size

    def find(self, i: int) -> int:
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        if self.rank[ri] < self.rank[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        if self.rank[ri] == self.rank[rj]:
            self.rank[ri] += 1
        self.count -= 1
        return True

    def roots(self) -> np.ndarray:
        return np.array([self.find(i) for i in range(len(self.parent))], dtype=np.int64)


def canonical_labels(raw) -> np.ndarray:
    """Relabel a partition so clusters are numbered by first appearance."""
    raw = np.asarray(raw)
    if raw.size == 0:
        return np.zeros(0, dtype=np.int64)
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[inverse.reshape(-1)]


@dataclass
class ClusterLabels:
    labels: np.ndarray
    cluster_count: int

    def label(self, i: int) -> int:
        return int(self.labels[i])

    def same(self, i: int, j: int) -> bool:
        return self.labels[i] == self.labels[j]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.cluster_count)


# --------------------------------------------------------------------------
# neighbour search

def _all_pairs(radii, dirs, t_thr):
    t = _polar_t(radii[:, None], dirs[:, None, :], radii[None, :], dirs[None, :, :])
    i, j = np.nonzero(np.triu(t <= t_thr, k=1))
    return i, j


def _shell_pairs(radii, dirs, D, t_thr):
    """Candidate pairs via Euclidean range queries on Poincare coordinates.

    For ``|x| >= tanh(a/2)`` and ``|y| >= tanh(b/2)``, ``d(x, y) <= D`` forces
    ``|x - y|^2 <= (t_thr / 2) sech^2(a/2) sech^2(b/2)``.  Centres are cut
    into thin shells so that this Euclidean radius stays tight, and each
    shell is only matched against shells within reach.
    """
    width = min(D, 0.5)
    shell = np.floor(radii / width).astype(np.int64)
    pts = geometry.from_polar(radii, dirs)
    order = np.argsort(shell, kind="stable")
    bounds_ = np.searchsorted(shell[order], np.arange(shell.max() + 2))
    members = {}
    trees = {}
    for s in range(shell.max() + 1):
        idx = order[bounds_[s]:bounds_[s + 1]]
        if idx.size:
            members[s] = idx
            trees[s] = cKDTree(pts[idx])
    reach = int(math.ceil(D / width)) + 1
    base = math.sqrt(t_thr / 2.0) * (1.0 + 1e-7)
    out_i, out_j = [], []
    for s, tree_s in trees.items():
        sech_s = 1.0 / math.cosh(s * width / 2.0)
        for o in range(s, s + reach + 1):
            if o not in trees:
                continue
            eps = base * sech_s / math.cosh(o * width / 2.0)
            if o == s:
                pairs = tree_s.query_pairs(eps, output_type="ndarray")
                if pairs.size:
                    out_i.append(members[s][pairs[:, 0]])
                    out_j.append(members[s][pairs[:, 1]])
            else:
                m = tree_s.sparse_distance_matrix(trees[o], eps, output_type="ndarray")
                if m.size:
                    out_i.append(members[s][m["i"]])
                    out_j.append(members[o][m["j"]])
    if not out_i:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    i = np.concatenate(out_i)
    j = np.concatenate(out_j)
    keep = _polar_t(radii[i], dirs[i], radii[j], dirs[j]) <= t_thr
    return i[keep], j[keep]


def _window_pairs(phi_a, phi_b, delta, same):
    """Pairs (i, j) with angular gap |phi_a[i] - phi_b[j]| <= delta (mod 2 pi)."""
    order = np.argsort(phi_b)
    sorted_b = phi_b[order]
    nb = sorted_b.size
    if delta >= np.pi:
        src = np.repeat(np.arange(phi_a.size), nb)
        tgt = np.tile(np.arange(nb), phi_a.size)
    else:
        ext = np.concatenate((sorted_b - 2 * np.pi, sorted_b, sorted_b + 2 * np.pi))
        lo = np.searchsorted(ext, phi_a - delta, side="left")
        hi = np.searchsorted(ext, phi_a + delta, side="right")
        cnt = hi - lo
        total = int(cnt.sum())
        src = np.repeat(np.arange(phi_a.size), cnt)
        starts = np.repeat(lo - np.concatenate(([0], np.cumsum(cnt)[:-1])), cnt)
        tgt = order[(starts + np.arange(total)) % nb]
    if same:
        keep = src < tgt
        return src[keep], tgt[keep]
    return src, tgt


def _sweep_pairs(radii, dirs, D, t_thr):
    """Candidate pairs in H^2 by shells and sorted-angle windows.

    Centres at radii >= a and >= b within distance D differ in angle by at
    most ``2 asin(sqrt((cosh D - 1) / (2 sinh a sinh b)))``.
    """
    width = min(D, 0.5)
    shell = np.floor(radii / width).astype(np.int64)
    phi = np.arctan2(dirs[:, 1], dirs[:, 0])
    order = np.argsort(shell, kind="stable")
    cuts = np.searchsorted(shell[order], np.arange(shell.max() + 2))
    members = {s: order[cuts[s]:cuts[s + 1]] for s in range(shell.max() + 1)
               if cuts[s + 1] > cuts[s]}
    reach = int(math.ceil(D / width)) + 1
    cosh_m1 = math.cosh(D) - 1.0
    out_i, out_j = [], []
    for s, idx_s in members.items():
        for o in range(s, s + reach + 1):
            idx_o = members.get(o)
            if idx_o is None:
                continue
            den = 2.0 * math.sinh(s * width) * math.sinh(o * width)
            ratio = cosh_m1 / den if den > 0 else math.inf
            delta = math.pi if ratio >= 1.0 else 2.0 * math.asin(math.sqrt(ratio))
            a, b = _window_pairs(phi[idx_s], phi[idx_o], delta * (1 + 1e-9) + 1e-12, o == s)
            out_i.append(idx_s[a])
            out_j.append(idx_o[b])
    i = np.concatenate(out_i)
    j = np.concatenate(out_j)
    keep = _polar_t(radii[i], dirs[i], radii[j], dirs[j]) <= t_thr
    return i[keep], j[keep]


def adjacent_pairs(real: Realization, method: str = "auto"):
    """Index pairs of centres within 2R, each unordered pair once.

    ``method`` is ``"all"`` (every pair), ``"shells"`` (radial shells with
    angular sweeps in H^2, Euclidean range queries otherwise) or ``"auto"``,
    which picks all pairs below ALL_PAIRS_LIMIT centres.
    """
    n_pts = len(real)
    D = 2.0 * real.params.R
    t_thr = _t_threshold(D)
    if method == "auto":
        method = "all" if n_pts < ALL_PAIRS_LIMIT else "shells"
    if n_pts < 2:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if method == "all":
        return _all_pairs(real.radii, real.directions, t_thr)
    if method == "shells":
        if real.params.n == 2:
            return _sweep_pairs(real.radii, real.directions, D, t_thr)
        return _shell_pairs(real.radii, real.directions, D, t_thr)
    raise ValueError(f"unknown method {method!r}")


def build_clusters(real: Realization, method: str = "auto") -> ClusterLabels:
    """Connected ball clusters of a realization."""
    n_pts = len(real)
    if n_pts == 0:
        return ClusterLabels(np.zeros(0, dtype=np.int64), 0)
    i, j = adjacent_pairs(real, method)
    graph = sparse.coo_matrix((np.ones(i.size, dtype=np.int8), (i, j)), shape=(n_pts, n_pts))
    count, raw = connected_components(graph, directed=False)
    return ClusterLabels(canonical_labels(raw), int(count))


def brute_force_clusters(real: Realization) -> ClusterLabels:
    """Reference clustering: every pair tested with the Poincare distance formula."""
    pts = real.centers
    n_pts = len(real)
    uf = UnionFind(n_pts)
    limit = 2.0 * real.params.R + BOUNDARY_TOL
    for a in range(n_pts - 1):
        d = geometry.distances_to(pts[a], pts[a + 1:])
        for b in np.nonzero(d <= limit)[0]:
            uf.union(a, a + 1 + int(b))
    return ClusterLabels(canonical_labels(uf.roots()), uf.count)


# --------------------------------------------------------------------------
# coverage and connection

def _within(real: Realization, p, radius: float) -> np.ndarray:
    r, u = _polar_of(p)
    t = _polar_t(r, u, real.radii, real.directions)
    return t <= _t_threshold(radius)


def is_covered(p, real: Realization) -> bool:
    """Whether ``p`` lies in some ball ``S(x, R)`` of the realization."""
    if len(real) == 0:
        return False
    return bool(np.any(_within(real, p, real.params.R)))


def connected_in(real: Realization, u, v, clusters: ClusterLabels | None = None) -> bool:
    """Whether one cluster of balls covers both ``u`` and ``v``."""
    if len(real) == 0:
        return False
    near_u = _within(real, u, real.params.R)
    near_v = _within(real, v, real.params.R)
    if not near_u.any() or not near_v.any():
        return False
    if clusters is None:
        clusters = build_clusters(real)
    return bool(np.intersect1d(clusters.labels[near_u], clusters.labels[near_v]).size)


def connection_prob(u, v, params: ModelParams, rho: float, trials: int, seed: int,
                    stream_key: int | None = None) -> Estimate:
    """Monte Carlo estimate of P[u <-> v] inside the window ``S(0, rho)``.

    The window truncates chains that leave it, so this is a lower bound on
    the infinite-volume probability.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    margin = rho - 2.0 * params.R
    for p in (u, v):
        if geometry.hyperbolic_radius(geometry.as_point(p)) > margin + 1e-12:
            raise ValueError("points must lie within S(0, rho - 2R)")
    hits = np.zeros(trials, dtype=bool)
    for t in range(trials):
        keys = (t,) if stream_key is None else (stream_key, t)
        real = sampling.sample_realization_rng(params, rho, sampling.stream(seed, *keys), seed, t)
        hits[t] = connected_in(real, u, v)
    return Estimate.from_samples(hits)


# --------------------------------------------------------------------------
# annulus crossings

@dataclass
class CrossingStats:
    trials: int
    crossing: np.ndarray
    crossing_clusters: np.ndarray
    vacant_crossing: np.ndarray | None = None

    @property
    def crossing_freq(self) -> Estimate:
        return Estimate.from_samples(self.crossing)

    @property
    def mean_crossing_clusters(self) -> Estimate:
        return Estimate.from_samples(self.crossing_clusters)

    @property
    def vacant_freq(self) -> Estimate | None:
        if self.vacant_crossing is None:
            return None
        return Estimate.from_samples(self.vacant_crossing)


def _check_annulus(R: float, rho1: float, rho2: float):
    if not (2.0 * R <= rho1 < rho2):
        raise ValueError(f"need 2R <= rho1 < rho2, got R={R}, rho1={rho1}, rho2={rho2}")


def crossing_clusters(real: Realization, rho1: float, rho2: float,
                      clusters: ClusterLabels | None = None) -> int:
    """Number of clusters with a centre in ``S(0, rho1)`` whose balls reach ``rho2``."""
    if len(real) == 0:
        return 0
    if clusters is None:
        clusters = build_clusters(real)
    inner = clusters.labels[real.radii <= rho1]
    outer = clusters.labels[real.radii >= rho2 - real.params.R]
    return int(np.intersect1d(inner, outer).size)


def annulus_crossing(params: ModelParams, rho1: float, rho2: float, trials: int, seed: int,
                     grid_step: float | None = None, stream_key: int | None = None) -> CrossingStats:
    """Crossing statistics of the annulus ``rho1 -> rho2`` over independent trials.

    Realizations live in ``S(0, rho2 + 2R)``.  With ``grid_step`` set (n = 2)
    the vacant crossing indicator is evaluated on the same realizations.
    ``stream_key`` inserts an extra key in the RNG stream so that several
    scans can share one master seed.
    """
    _check_annulus(params.R, rho1, rho2)
    if trials <= 0:
        raise ValueError("trials must be positive")
    window = rho2 + 2.0 * params.R
    lattice = None
    if grid_step is not None:
        lattice = polar_lattice(rho1, rho2, _check_grid(params, grid_step))
    cross = np.zeros(trials, dtype=bool)
    counts = np.zeros(trials, dtype=np.int64)
    vacant = np.zeros(trials, dtype=bool) if lattice is not None else None
    for t in range(trials):
        keys = (t,) if stream_key is None else (stream_key, t)
        rng = sampling.stream(seed, *keys)
        real = sampling.sample_realization_rng(params, window, rng, seed, t)
        counts[t] = crossing_clusters(real, rho1, rho2)
        cross[t] = counts[t] > 0
        if lattice is not None:
            vacant[t] = lattice.vacant_crossing(real)
    return CrossingStats(trials, cross, counts, vacant)


def coupled_crossing(params: ModelParams, lambdas, rho1: float, rho2: float,
                     trials: int, seed: int) -> np.ndarray:
    """Crossing indicators for several intensities on one coupled sample.

    Each trial draws the process at the largest intensity, marks every
    centre with a uniform label and keeps centres with mark below
    ``lam / lam_max``; the indicators are then pointwise monotone in lam.
    Returns a boolean array of shape (len(lambdas), trials).
    """
    _check_annulus(params.R, rho1, rho2)
    lambdas = np.asarray(lambdas, dtype=float)
    top = float(lambdas.max())
    window = rho2 + 2.0 * params.R
    out = np.zeros((lambdas.size, trials), dtype=bool)
    for t in range(trials):
        rng = sampling.stream(seed, t)
        real = sampling.sample_realization_rng(params.with_lam(top), window, rng, seed, t)
        marks = rng.random(len(real))
        for a, lam in enumerate(lambdas):
            keep = marks < (lam / top if top > 0 else 0.0)
            out[a, t] = crossing_clusters(real.subset(keep), rho1, rho2) > 0
    return out


# --------------------------------------------------------------------------
# vacant crossings (H^2)

def _check_grid(params: ModelParams, grid_step: float) -> float:
    if params.n != 2:
        raise ValueError("vacant crossings are implemented for n = 2 only")
    if not 0 < grid_step <= params.R / 4 + 1e-15:
        raise ValueError("grid_step must lie in (0, R/4]")
    return float(grid_step)


class PolarLattice:
    """Polar cells of the disk ``S(0, rho2)`` with hyperbolic diameter <= h.

    Rings have radial width h/2 and every cell has arc length <= h/2 along
    its outer circle; two points of a cell are joined by a radial segment
    plus an arc of total length <= h.  Cells sharing a boundary segment of
    positive length are neighbours.
    """

    def __init__(self, rho1: float, rho2: float, h: float):
        self.rho1, self.rho2, self.h = rho1, rho2, h
        w = h / 2.0
        n_rings = int(math.ceil(rho2 / w - 1e-12))
        edges = np.minimum(np.arange(n_rings + 1) * w, rho2)
        self.inner_r = edges[:-1]
        self.outer_r = edges[1:]
        self.mid_r = 0.5 * (self.inner_r + self.outer_r)
        self.counts = np.maximum(3, np.ceil(2 * np.pi * np.sinh(self.outer_r) / w - 1e-9)).astype(np.int64)
        self.offsets = np.concatenate(([0], np.cumsum(self.counts)))
        self.size = int(self.offsets[-1])
        rows, cols = [], []
        for j, m in enumerate(self.counts):
            base = self.offsets[j]
            i = np.arange(m)
            rows.append(base + i)
            cols.append(base + (i + 1) % m)
            if j + 1 < len(self.counts):
                m2 = self.counts[j + 1]
                l = np.arange(m2)
                a = (l * m) // m2
                b = ((l + 1) * m + m2 - 1) // m2 - 1
                outer = self.offsets[j + 1] + l
                rows.append(base + a)
                cols.append(outer)
                two = b != a
                rows.append(base + b[two])
                cols.append(outer[two])
        self.edge_a = np.concatenate(rows)
        self.edge_b = np.concatenate(cols)
        ring_of = np.repeat(np.arange(len(self.counts)), self.counts)
        self.inner_cells = self.inner_r[ring_of] < rho1
        self.outer_cells = ring_of == len(self.counts) - 1

    def covered_cells(self, real: Realization) -> np.ndarray:
        """Cells whose centre is within ``R + h`` of some ball centre."""
        covered = np.zeros(self.size, dtype=bool)
        if len(real) == 0:
            return covered
        reach = real.params.R + self.h
        order = np.argsort(real.radii)
        rs = real.radii[order]
        phis = np.mod(np.arctan2(real.directions[order, 1], real.directions[order, 0]), 2 * np.pi)
        cosh_reach = math.cosh(reach)
        for j, m in enumerate(self.counts):
            rm = self.mid_r[j]
            lo_i = np.searchsorted(rs, rm - reach, side="left")
            hi_i = np.searchsorted(rs, rm + reach, side="right")
            if hi_i <= lo_i:
                continue
            rc = rs[lo_i:hi_i]
            pc = phis[lo_i:hi_i]
            num = cosh_reach - np.cosh(rc - rm)
            den = 2.0 * np.sinh(rc) * math.sinh(rm)
            with np.errstate(divide="ignore", invalid="ignore"):
                s2 = np.where(den > 0, num / den, np.inf)
            full = s2 >= 1.0
            seg = covered[self.offsets[j]:self.offsets[j + 1]]
            if np.any(full):
                seg[:] = True
                continue
            half = 2.0 * np.arcsin(np.sqrt(np.clip(s2, 0.0, 1.0)))
            step = 2 * np.pi / m
            lo = np.ceil((pc - half) / step - 0.5).astype(np.int64)
            hi = np.floor((pc + half) / step - 0.5).astype(np.int64)
            cnt = hi - lo + 1
            ok = cnt > 0
            lo, cnt = lo[ok], np.minimum(cnt[ok], m)
            start = np.mod(lo, m)
            end = start + cnt
            diff = np.zeros(m + 1, dtype=np.int64)
            wrap = end > m
            np.add.at(diff, start, 1)
            np.add.at(diff, np.where(wrap, m, end), -1)
            np.add.at(diff, np.zeros(int(wrap.sum()), dtype=np.int64), 1)
            np.add.at(diff, end[wrap] - m, -1)
            seg |= np.cumsum(diff[:m]) > 0
        return covered

    def vacant_components(self, vacant: np.ndarray):
        keep = vacant[self.edge_a] & vacant[self.edge_b]
        graph = sparse.coo_matrix(
            (np.ones(int(keep.sum()), dtype=np.int8), (self.edge_a[keep], self.edge_b[keep])),
            shape=(self.size, self.size))
        return connected_components(graph, directed=False)[1]

    def vacant_crossing(self, real: Realization) -> bool:
        vacant = ~self.covered_cells(real)
        start = vacant & self.inner_cells
        goal = vacant & self.outer_cells
        if not start.any() or not goal.any():
            return False
        labels = self.vacant_components(vacant)
        return bool(np.intersect1d(labels[start], labels[goal]).size)


@lru_cache(maxsize=8)
def polar_lattice(rho1: float, rho2: float, h: float) -> PolarLattice:
    return PolarLattice(rho1, rho2, h)


def vacant_crossing(params: ModelParams, rho1: float, rho2: float, grid_step: float,
                    trials: int, seed: int) -> Estimate:
    """Frequency of a vacant lattice path from ``S(0, rho1)`` to the sphere of radius rho2.

    A cell counts as vacant only when its centre is farther than
    ``R + grid_step`` from every ball centre, so the whole cell is vacant;
    the estimate therefore errs low and converges as grid_step -> 0.
    """
    _check_annulus(params.R, rho1, rho2)
    lattice = polar_lattice(rho1, rho2, _check_grid(params, grid_step))
    if trials <= 0:
        raise ValueError("trials must be positive")
    window = rho2 + params.R + grid_step
    hits = np.zeros(trials, dtype=bool)
    for t in range(trials):
        real = sampling.sample_realization(params, window, seed, t)
        hits[t] = lattice.vacant_crossing(real)
    return Estimate.from_samples(hits)


# --------------------------------------------------------------------------
# phase scan

@dataclass
class PhaseRow:
    lam: float
    crossing_freq: float
    crossing_se: float
    mean_crossing_clusters: float
    vacant_freq: float
    vacant_se: float


def phase_row(params: ModelParams, rho1: float, rho2: float, trials: int, seed: int,
              index: int, grid_step: float | None) -> PhaseRow:
    stats = annulus_crossing(params, rho1, rho2, trials, seed, grid_step=grid_step, stream_key=index)
    cf = stats.crossing_freq
    vf = stats.vacant_freq
    return PhaseRow(params.lam, cf.mean, cf.stderr, stats.mean_crossing_clusters.mean,
                    vf.mean if vf else math.nan, vf.stderr if vf else math.nan)


def phase_scan(n: int, R: float, lambdas, rho1: float, rho2: float, trials: int, seed: int,
               grid_step: float | None = None) -> list[PhaseRow]:
    """Crossing, multiplicity and vacant crossing statistics along an intensity sweep.

    Intensity ``lambdas[i]`` uses RNG streams ``(seed, i, trial)``.
    """
    if n != 2:
        raise ValueError("phase scans are defined for n = 2")
    if grid_step is None:
        grid_step = R / 4
    return [phase_row(ModelParams(n, R, float(lam)), rho1, rho2, trials, seed, i, grid_step)
            for i, lam in enumerate(lambdas)]


# --------------------------------------------------------------------------
# correlation inequalities

@dataclass(frozen=True)
class BallRegion:
    """Ball ``S(c, radius)`` with c at hyperbolic distance ``offset`` along ``direction``."""

    offset: float
    radius: float
    direction: tuple = (1.0, 0.0)

    def polar(self):
        u = np.asarray(self.direction, dtype=float)
        return self.offset, u / np.linalg.norm(u)

    def count(self, real: Realization) -> int:
        if len(real) == 0:
            return 0
        r, u = self.polar()
        return int(np.count_nonzero(_polar_t(r, u, real.radii, real.directions)
                                    <= _t_threshold(self.radius)))


@dataclass(frozen=True)
class FKGResult:
    pA: float
    pB: float
    pAB: float
    covariance: float
    stderr: float
    zscore: float
    trials: int


def _covariance_estimate(ia: np.ndarray, ib: np.ndarray):
    ia = ia.astype(float)
    ib = ib.astype(float)
    pa, pb = ia.mean(), ib.mean()
    cov = float((ia * ib).mean() - pa * pb)
    psi = ia * ib - pb * ia - pa * ib
    se = float(psi.std(ddof=1) / math.sqrt(ia.size))
    return pa, pb, cov, se


def empirical_fkg(params: ModelParams, rho: float, region_a: BallRegion, k_a: int,
                  region_b: BallRegion, k_b: int, trials: int, seed: int) -> FKGResult:
    """Estimate P[A], P[B], P[A and B] for A = {N(region_a) >= k_a}, B likewise.

    Both events are increasing, so ``pAB - pA pB`` should be nonnegative up to
    noise; ``zscore`` is that difference in standard errors.
    """
    for reg in (region_a, region_b):
        if reg.radius <= 0 or reg.offset < 0 or reg.offset + reg.radius > rho + 1e-12:
            raise ValueError("regions must be balls inside the window")
        if len(reg.direction) != params.n:
            raise ValueError("region direction has the wrong dimension")
    if k_a < 1 or k_b < 1:
        raise ValueError("thresholds must be >= 1")
    ia = np.zeros(trials, dtype=bool)
    ib = np.zeros(trials, dtype=bool)
    for t in range(trials):
        real = sampling.sample_realization(params, rho, seed, t)
        ia[t] = region_a.count(real) >= k_a
        ib[t] = region_b.count(real) >= k_b
    pa, pb, cov, se = _covariance_estimate(ia, ib)
    z = cov / se if se > 0 else 0.0
    return FKGResult(pa, pb, float((ia & ib).mean()), cov, se, z, trials)


@dataclass(frozen=True)
class SqrtTrickResult:
    p_first: float
    p_first_se: float
    p_union: float
    p_union_se: float
    bound: float
    m: int
    trials: int

    @property
    def zscore(self) -> float:
        """(p_first - bound) in combined standard errors."""
        slope = 0.0
        if self.p_union < 1.0:
            slope = (1.0 - self.p_union) ** (1.0 / self.m - 1.0) / self.m
        se = math.hypot(self.p_first_se, slope * self.p_union_se)
        return (self.p_first - self.bound) / se if se > 0 else 0.0


def empirical_sqrt_trick(params: ModelParams, r_in: float, r_out: float, half_width: float,
                         k: int, m: int, trials: int, seed: int) -> SqrtTrickResult:
    """Square-root trick on m rotated copies of an annular sector event (H^2).

    ``A_i`` = at least k centres with radius in [r_in, r_out] and angle
    within ``half_width`` of ``2 pi i / m``.
    """
    if params.n != 2:
        raise ValueError("sector events are defined for n = 2")
    if not (0 <= r_in < r_out) or not (0 < half_width <= np.pi) or m < 1 or k < 1:
        raise ValueError("malformed sector event")
    first = np.zeros(trials, dtype=bool)
    union = np.zeros(trials, dtype=bool)
    centres = 2 * np.pi * np.arange(m) / m
    for t in range(trials):
        real = sampling.sample_realization(params, r_out, seed, t)
        ring = real.radii >= r_in
        if not ring.any():
            continue
        phi = np.arctan2(real.directions[ring, 1], real.directions[ring, 0])
        gap = np.abs(np.angle(np.exp(1j * (phi[None, :] - centres[:, None]))))
        hits = np.count_nonzero(gap <= half_width, axis=1) >= k
        first[t] = hits[0]
        union[t] = hits.any()
    p1 = Estimate.from_samples(first)
    pu = Estimate.from_samples(union)
    return SqrtTrickResult(p1.mean, p1.stderr, pu.mean, pu.stderr,
                           bounds.sqrt_trick_bound(pu.mean, m), m, trials)
