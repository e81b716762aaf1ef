"""Elementary geometry of the unit sphere S^{d-1} for d in {2, 3}."""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi

import numpy as np

SUPPORTED_DIMS = (2, 3)


def _check_dim(d: int) -> None:
    if d not in SUPPORTED_DIMS:
        raise ValueError(f"only d in {SUPPORTED_DIMS} is supported, got d={d}")


def sphere_area(d: int) -> float:
    """Surface measure omega_d = 2 pi^{d/2} / Gamma(d/2) of S^{d-1}."""
    return 2.0 * pi ** (d / 2.0) / gamma(d / 2.0)


def normalize(x: np.ndarray) -> np.ndarray:
    """Project nonzero vectors (last axis) onto the unit sphere."""
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(nrm == 0):
        raise ValueError("cannot normalize the zero vector")
    return x / nrm


@dataclass(frozen=True)
class SpherePoint:
    """A point on S^{d-1}; coordinates are re-normalized on construction."""

    coords: tuple[float, ...]

    def __init__(self, coords):
        c = normalize(np.asarray(coords, dtype=float).ravel())
        _check_dim(c.size)
        object.__setattr__(self, "coords", tuple(float(v) for v in c))

    @property
    def d(self) -> int:
        return len(self.coords)

    def asarray(self) -> np.ndarray:
        return np.array(self.coords)


@dataclass(frozen=True)
class Cap:
    """Open geodesic ball B(center, radius) on the sphere."""

    center: SpherePoint
    radius: float

    def __post_init__(self):
        if not 0.0 < self.radius <= pi:
            raise ValueError(f"cap radius must lie in (0, pi], got {self.radius}")

    def contains(self, x: np.ndarray) -> np.ndarray:
        return geodesic_distance(self.center.asarray(), x) < self.radius


def _as_array(x) -> np.ndarray:
    if isinstance(x, SpherePoint):
        return x.asarray()
    return np.asarray(x, dtype=float)


def geodesic_distance(x, y) -> np.ndarray | float:
    """rho(x, y) = arccos(x . y), broadcasting over leading axes.

    Evaluated as 2 arcsin(|x - y| / 2), which keeps full relative accuracy for
    nearby points where arccos of a rounded dot product does not.
    """
    x = _as_array(x)
    y = _as_array(y)
    chord = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    out = 2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))
    return float(out) if np.ndim(out) == 0 else out


_NEAR = 0.99


def pairwise_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix of geodesic distances between rows of x and rows of y.

    arccos of the Gram matrix, with close pairs (dot > 0.99) recomputed from
    the chord to avoid the loss of precision of arccos near 1.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dot = np.clip(x @ y.T, -1.0, 1.0)
    out = np.arccos(dot)
    i, j = np.nonzero(dot > _NEAR)
    if i.size:
        out[i, j] = geodesic_distance(x[i], y[j])
    return out


def chord_from_geodesic(r):
    """Euclidean chord length 2 sin(r/2) for geodesic distance r."""
    return 2.0 * np.sin(np.asarray(r) / 2.0)


def geodesic_from_chord(c):
    return 2.0 * np.arcsin(np.clip(np.asarray(c) / 2.0, 0.0, 1.0))


def cap_area(d: int, r: float) -> float:
    """Measure of a cap of geodesic radius r on S^{d-1}.

    Uses omega_{d-1} * int_0^r sin^{d-2}(v) dv, which is 2r on the circle and
    2 pi (1 - cos r) on S^2 (evaluated as 4 pi sin^2(r/2) to avoid cancellation).
    """
    _check_dim(d)
    if not 0.0 < r <= pi:
        raise ValueError(f"cap radius must lie in (0, pi], got {r}")
    if d == 2:
        return 2.0 * r
    return 4.0 * pi * float(np.sin(r / 2.0)) ** 2


def sample_uniform(d: int, n: int, seed: int | np.random.Generator | None = 0) -> np.ndarray:
    """Draw n i.i.d. points uniform on S^{d-1}, as an (n, d) array."""
    _check_dim(d)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return normalize(rng.standard_normal((n, d)))


def random_rotation(d: int, seed: int | np.random.Generator | None = 0) -> np.ndarray:
    """Haar-random rotation matrix in SO(d)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def to_spherical(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(cos theta, phi) for points on S^2 with the polar axis along e3."""
    x = np.asarray(x, dtype=float)
    z = np.clip(x[..., 2], -1.0, 1.0)
    phi = np.arctan2(x[..., 1], x[..., 0])
    return z, phi


def e1(d: int) -> np.ndarray:
    out = np.zeros(d)
    out[0] = 1.0
    return out
