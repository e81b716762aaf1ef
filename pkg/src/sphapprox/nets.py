"""Maximal delta-nets on S^{d-1} and the associated cell partitions."""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, field
from math import ceil, floor, pi

import numpy as np
from scipy.spatial import ConvexHull, SphericalVoronoi, cKDTree

from .sphere_geom import (
    _check_dim,
    chord_from_geodesic,
    e1,
    normalize,
    pairwise_distance,
    sphere_area,
)

# relative slack used when comparing float distances against delta
DIST_RTOL = 1e-12


@dataclass
class LevelNet:
    """Points of a maximal delta-net at one level of a hierarchy."""

    delta: float
    points: np.ndarray
    level: int = 0
    repaired: int = 0  # points added by the covering repair pass

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def to_json(self) -> dict:
        return {"level": self.level, "delta": self.delta, "points": self.points.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "LevelNet":
        return cls(float(obj["delta"]), np.array(obj["points"], dtype=float), int(obj["level"]))


def fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform spherical Fibonacci lattice of n points on S^2."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def min_separation(points: np.ndarray) -> float:
    """Smallest pairwise geodesic distance (inf for a single point)."""
    points = np.atleast_2d(points)
    if len(points) < 2:
        return float("inf")
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=2)
    i = np.argmin(dist[:, 1])
    _, j = tree.query(points[i], k=2)
    return float(pairwise_distance(points[i : i + 1], points[j[1] : j[1] + 1])[0, 0])


def _circle_covering_radius(points: np.ndarray) -> tuple[float, np.ndarray]:
    ang = np.sort(np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * pi))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * pi]]))
    i = int(np.argmax(gaps))
    mid = ang[i] + gaps[i] / 2
    return float(gaps[i] / 2), np.array([np.cos(mid), np.sin(mid)])


def _hull_holes(points: np.ndarray):
    """Circumcenters and geodesic circumradii of the Delaunay triangles on S^2.

    The facets of the convex hull of points on the sphere are the spherical
    Delaunay triangles; each circumcircle is empty, so the largest circumradius
    is the covering radius of the point set.
    """
    hull = ConvexHull(points)
    normals = hull.equations[:, :3]
    offsets = -hull.equations[:, 3]
    centers = normalize(normals)
    radii = np.arccos(np.clip(offsets / np.linalg.norm(normals, axis=1), -1.0, 1.0))
    return centers, radii


def covering_radius(points: np.ndarray, n_check: int = 20000) -> float:
    """sup_x min_i rho(x, p_i) on the sphere.

    Exact for d = 2 (largest half-gap) and for d = 3 with at least four
    non-coplanar points (Delaunay circumradii); otherwise estimated on a dense
    lattice.
    """
    points = np.atleast_2d(points)
    d = points.shape[1]
    if d == 2:
        return _circle_covering_radius(points)[0]
    try:
        _, radii = _hull_holes(points)
        return float(radii.max())
    except Exception:
        probe = fibonacci_sphere(n_check)
        return float(pairwise_distance(probe, points).min(axis=1).max())


def is_maximal_net(points: np.ndarray, delta: float) -> bool:
    return (
        min_separation(points) >= delta * (1 - DIST_RTOL)
        and covering_radius(points) < delta * (1 + DIST_RTOL)
    )


def _equispaced_circle(delta: float) -> np.ndarray:
    ratio = 2 * pi / delta
    k = int(round(ratio)) if abs(ratio - round(ratio)) < 1e-9 else int(floor(ratio))
    k = max(k, 2)
    t = 2 * pi * np.arange(k) / k
    return np.column_stack([np.cos(t), np.sin(t)])


def _farthest_point_net(pool: np.ndarray, delta: float) -> np.ndarray:
    """Greedy farthest-point insertion from e1 over a candidate pool.

    dist[i] holds the geodesic distance from pool[i] to the accepted set; a
    lazy max-heap tracks the farthest candidate.  Only candidates within the
    current farthest distance of a new point can change, so each update is a
    ball query.
    """
    kd = cKDTree(pool)
    dist = np.full(len(pool), np.inf)
    accepted = []
    start = int(np.argmax(pool @ e1(3)))
    heap = [(-np.inf, start)]
    while heap:
        negd, i = heapq.heappop(heap)
        cur = dist[i]
        if -negd != cur:
            if cur >= delta:
                heapq.heappush(heap, (-cur, i))
            continue
        if cur < delta:
            break
        accepted.append(i)
        reach = np.pi if not np.isfinite(cur) else min(cur, np.pi)
        idx = np.asarray(kd.query_ball_point(pool[i], float(chord_from_geodesic(reach)) * (1 + 1e-9) + 1e-15))
        if not np.isfinite(cur):
            idx = np.arange(len(pool))
        new = np.arccos(np.clip(pool[idx] @ pool[i], -1.0, 1.0))
        upd = new < dist[idx]
        dist[idx[upd]] = new[upd]
        for k in idx[upd]:
            if dist[k] >= delta:
                heapq.heappush(heap, (-dist[k], int(k)))
        if len(accepted) == 1:
            heap = [(-v, int(k)) for k, v in enumerate(dist) if v >= delta]
            heapq.heapify(heap)
    return pool[np.array(accepted)]


def _repair_covering(points: np.ndarray, delta: float, max_rounds: int = 100) -> tuple[np.ndarray, int]:
    """Insert Delaunay circumcenters of radius >= delta until the net covers.

    A circumcenter of an empty circle of radius R >= delta is at distance
    >= delta from every net point, so insertion keeps the separation.
    """
    added = 0
    for _ in range(max_rounds):
        if len(points) < 4:
            probe = fibonacci_sphere(20000)
            dmin = pairwise_distance(probe, points).min(axis=1)
            i = int(np.argmax(dmin))
            if dmin[i] < delta:
                return points, added
            points = np.vstack([points, probe[i]])
            added += 1
            continue
        centers, radii = _hull_holes(points)
        bad = np.nonzero(radii >= delta)[0]
        if bad.size == 0:
            return points, added
        bad = bad[np.argsort(-radii[bad], kind="stable")]
        chosen = np.empty((0, 3))
        cos_delta = np.cos(delta)
        for i in bad:
            c = centers[i]
            if not np.any(chosen @ c > cos_delta):
                chosen = np.vstack([chosen, c])
        points = np.vstack([points, chosen])
        added += len(chosen)
    warnings.warn("covering repair did not converge; increase pool density", RuntimeWarning)
    return points, added


def build_maximal_net(d: int, delta: float, seed: int = 0, level: int = 0, pool_factor: float = 64.0) -> LevelNet:
    """Maximal delta-net: pairwise distance >= delta and open delta-caps cover S^{d-1}.

    d = 2 uses the equispaced configuration with floor(2 pi / delta) points.
    d = 3 runs farthest-point insertion from e1 over a Fibonacci pool of
    about pool_factor * delta^{-2} candidates (plus +-e_i), then closes any
    covering gap left by the finite pool using Delaunay circumcenters.  The
    seed only rotates the candidate pool about e1, so nets are reproducible.
    """
    _check_dim(d)
    if not 0.0 < delta <= pi:
        raise ValueError(f"delta must lie in (0, pi], got {delta}")
    if d == 2:
        return LevelNet(delta, _equispaced_circle(delta), level)
    n_pool = max(int(ceil(pool_factor * delta ** -2)), 256)
    pool = fibonacci_sphere(n_pool)
    if seed:
        ang = np.random.default_rng(seed).uniform(0, 2 * pi)
        rot = np.array([[1, 0, 0], [0, np.cos(ang), -np.sin(ang)], [0, np.sin(ang), np.cos(ang)]])
        pool = pool @ rot.T
    pool = np.vstack([np.eye(3), -np.eye(3), pool])
    pts = _farthest_point_net(pool, delta)
    pts, added = _repair_covering(pts, delta)
    if added:
        warnings.warn(f"candidate pool left covering gaps; {added} points inserted", RuntimeWarning)
    return LevelNet(delta, pts, level, added)


# --------------------------------------------------------------------------
# partitions


@dataclass
class CellPartition:
    """Disjoint cells A_zeta with B(zeta, delta/2) in A_zeta in B(zeta, delta)."""

    net: LevelNet
    cell_of: np.ndarray  # owner index per fine sample (or None for exact cells)
    cell_area: np.ndarray
    samples: np.ndarray | None = field(default=None, repr=False)


def build_partition(net: LevelNet, samples: np.ndarray, areas: np.ndarray) -> CellPartition:
    """Assign each fine sample to the nearest net point within delta.

    Ties go to the smallest point index; a sample with no net point within
    delta means the net does not cover and raises ValueError.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    areas = np.asarray(areas, dtype=float)
    owner = np.empty(len(samples), dtype=np.int64)
    chunk = max(1, 2_000_000 // max(len(net), 1))
    for s in range(0, len(samples), chunk):
        dist = pairwise_distance(samples[s : s + chunk], net.points)
        owner[s : s + chunk] = np.argmin(dist, axis=1)  # argmin keeps the first index on ties
        best = dist[np.arange(dist.shape[0]), owner[s : s + chunk]]
        if np.any(best >= net.delta):
            raise ValueError("a sample has no net point within delta; the net does not cover")
    cell_area = np.bincount(owner, weights=areas, minlength=len(net))
    return CellPartition(net, owner, cell_area, samples)


def voronoi_partition(net: LevelNet) -> CellPartition:
    """Exact nearest-point (Voronoi) cells of the net.

    For a maximal delta-net each Voronoi cell lies between B(zeta, delta/2)
    and B(zeta, delta), so these cells satisfy the partition axioms with
    exactly computed areas.
    """
    pts = net.points
    d = net.d
    if len(pts) == 1:
        return CellPartition(net, np.zeros(0, dtype=np.int64), np.array([sphere_area(d)]))
    if d == 2:
        ang = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * pi)
        order = np.argsort(ang)
        a = ang[order]
        gaps = np.diff(np.concatenate([a, [a[0] + 2 * pi]]))
        area_sorted = 0.5 * (gaps + np.roll(gaps, 1))
        area = np.empty(len(pts))
        area[order] = area_sorted
        return CellPartition(net, np.zeros(0, dtype=np.int64), area)
    if len(pts) < 4:
        probe = fibonacci_sphere(200000)
        owner = np.argmin(pairwise_distance(probe, pts), axis=1)
        area = np.bincount(owner, minlength=len(pts)) * (sphere_area(3) / len(probe))
        return CellPartition(net, np.zeros(0, dtype=np.int64), area)
    sv = SphericalVoronoi(pts, radius=1.0, center=np.zeros(3))
    return CellPartition(net, np.zeros(0, dtype=np.int64), sv.calculate_areas())
