"""Positive cubature rules on nets, exact for spherical polynomials up to a degree."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, pi

import numpy as np
import scipy.linalg as sla

from .harmonics import basis_matrix, poly_space_dim
from .nets import LevelNet, voronoi_partition
from .sphere_geom import _check_dim, e1, sphere_area


class CubatureError(RuntimeError):
    """The moment system could not be solved with positive weights."""


@dataclass
class CubatureRule:
    points: np.ndarray
    weights: np.ndarray
    exact_degree: int
    level: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, f) -> float:
        """sum_i w_i f(x_i); f maps an (n, d) array to n values."""
        return float(np.dot(self.weights, np.asarray(f(self.points), dtype=float)))

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "degree": self.exact_degree,
            "nodes": self.points.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CubatureRule":
        return cls(np.array(obj["nodes"], dtype=float), np.array(obj["weights"], dtype=float),
                   int(obj["degree"]), int(obj["level"]))


def moments(degree: int, d: int) -> np.ndarray:
    """Exact integrals of the basis Y_{k nu}, k <= degree: sqrt(omega_d) for k = 0, else 0."""
    m = np.zeros(poly_space_dim(degree, d))
    m[0] = np.sqrt(sphere_area(d))
    return m


def moment_residual(rule: CubatureRule, degree: int | None = None) -> float:
    """max over basis functions of |sum w Y(x) - int Y dsigma|."""
    degree = rule.exact_degree if degree is None else degree
    A = basis_matrix(degree, rule.points, rule.d)
    return float(np.max(np.abs(A.T @ rule.weights - moments(degree, rule.d))))


def solve_weights(
    net: LevelNet | np.ndarray,
    degree: int,
    w0: np.ndarray | None = None,
    tol: float = 1e-10,
    level: int | None = None,
) -> CubatureRule:
    """Weights w = w0 + c with c the minimum-norm solution of A c = m - A w0.

    A holds the basis values Y_{k nu}(xi) (k <= degree) and w0 defaults to the
    Voronoi cell areas.  The correction comes from a QR factorization of A^T
    with one step of iterative refinement.

    Raises
    ------
    CubatureError
        If the net has fewer points than dim Pi_degree, the system is
        numerically rank deficient, the residual exceeds tol, or a weight is
        not positive.  A denser net (smaller gamma) is the usual remedy.
    """
    if isinstance(net, LevelNet):
        pts, lev = net.points, net.level
        if w0 is None:
            w0 = voronoi_partition(net).cell_area
    else:
        pts, lev = np.atleast_2d(np.asarray(net, dtype=float)), 0
        if w0 is None:
            w0 = voronoi_partition(LevelNet(np.pi, pts)).cell_area
    level = lev if level is None else level
    d = pts.shape[1]
    _check_dim(d)
    n = len(pts)
    D = poly_space_dim(degree, d)
    if n < D:
        raise CubatureError(
            f"net has {n} points but degree {degree} needs at least {D}; use a denser net (smaller gamma)"
        )
    w0 = np.asarray(w0, dtype=float)
    A = basis_matrix(degree, pts, d)
    m = moments(degree, d)
    r = m - A.T @ w0
    diag = {"n_points": n, "n_moments": D, "initial_residual": float(np.max(np.abs(r)))}
    w = w0.copy()
    if np.max(np.abs(r)) > tol / 10:
        Q, R = sla.qr(A, mode="economic")  # A (n x D) = Q R, so A^T = R^T Q^T
        rdiag = np.abs(np.diag(R))
        cond = float(rdiag.max() / rdiag.min()) if rdiag.min() > 0 else np.inf
        diag["condition_estimate"] = cond
        if not np.isfinite(cond) or cond > 1e12:
            raise CubatureError(f"moment matrix is rank deficient (condition ~ {cond:.3g}); refine the net")
        for _ in range(2):
            y = sla.solve_triangular(R, r, trans="T")
            w = w + Q @ y
            r = m - A.T @ w
    res = float(np.max(np.abs(r)))
    diag["residual"] = res
    diag["correction_rel"] = float(np.linalg.norm(w - w0) / np.linalg.norm(w0))
    if res > tol:
        raise CubatureError(f"moment residual {res:.3g} exceeds {tol:.1g}")
    if np.any(w <= 0):
        raise CubatureError(
            f"{int(np.sum(w <= 0))} nonpositive weights at degree {degree}; use a denser net (smaller gamma)"
        )
    return CubatureRule(pts, w, degree, level, diag)


def root_rule(d: int) -> CubatureRule:
    """The single node e1 with weight omega_d, exact for constants."""
    return CubatureRule(e1(d)[None, :], np.array([sphere_area(d)]), 0, 0, {"residual": 0.0})


def product_gauss_rule(d: int, degree: int) -> CubatureRule:
    """Tensor rule exact on Pi_degree, independent of any net.

    d = 3: Gauss-Legendre in z = cos(theta) times the equispaced rule in phi.
    d = 2: equispaced points with equal weights.
    """
    _check_dim(d)
    n_phi = degree + 1
    phi = 2 * pi * np.arange(n_phi) / n_phi
    if d == 2:
        pts = np.column_stack([np.cos(phi), np.sin(phi)])
        return CubatureRule(pts, np.full(n_phi, 2 * pi / n_phi), degree)
    nz = int(ceil((degree + 1) / 2))
    z, wz = np.polynomial.legendre.leggauss(nz)
    s = np.sqrt(1 - z * z)
    Z, P = np.meshgrid(z, phi, indexing="ij")
    S = np.sqrt(1 - Z * Z)
    pts = np.column_stack([(S * np.cos(P)).ravel(), (S * np.sin(P)).ravel(), Z.ravel()])
    w = np.outer(wz, np.full(n_phi, 2 * pi / n_phi)).ravel()
    del s
    return CubatureRule(pts, w, degree)


def weight_band(rule: CubatureRule, delta: float) -> tuple[float, float]:
    """(min, max) of w / delta^{d-1}."""
    scaled = rule.weights / delta ** (rule.d - 1)
    return float(scaled.min()), float(scaled.max())
