"""Newtonian atoms a_0 + sum a_nu G(x - y_nu) with poles outside the unit ball, and
harmonic extension of band-limited boundary data."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cubature import product_gauss_rule
from .harmonics import basis_degrees, basis_matrix, poisson_kernel, poly_space_dim
from .needlets import NeedletSystem, analyze, harmonic_coefficients, synthesis_polynomial
from .nterm import greedy_select
from .sphere_geom import _check_dim, normalize


def newton_kernel(d: int, r):
    """1/r^{d-2} for d > 2 and ln(1/r) for d = 2."""
    r = np.asarray(r, dtype=float)
    return -np.log(r) if d == 2 else r ** (2.0 - d)


@dataclass
class NewtonianAtom:
    """a_0 + sum_nu a_nu G(x - y_nu), G the Newtonian kernel; coeffs = (a_0, a_1, ..., a_n)."""

    poles: np.ndarray
    coeffs: np.ndarray
    d: int

    def __post_init__(self):
        _check_dim(self.d)
        self.poles = np.atleast_2d(np.asarray(self.poles, dtype=float)).reshape(-1, self.d)
        self.coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        if self.coeffs.size != len(self.poles) + 1:
            raise ValueError("need one coefficient per pole plus the constant a_0")
        if len(self.poles) and np.min(np.linalg.norm(self.poles, axis=1)) <= 1.0:
            raise ValueError("poles must lie strictly outside the closed unit ball")

    @property
    def n_poles(self) -> int:
        return len(self.poles)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "a0": float(self.coeffs[0]),
            "poles": self.poles.tolist(),
            "coeffs": self.coeffs[1:].tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict | str) -> "NewtonianAtom":
        if isinstance(obj, str):
            obj = json.loads(obj)
        d = int(obj["d"])
        poles = np.asarray(obj["poles"], dtype=float).reshape(-1, d)
        return cls(poles, np.concatenate([[obj["a0"]], obj["coeffs"]]), d)


def eval_atom(atom: NewtonianAtom, x) -> np.ndarray | float:
    """Value of the atom at points x of the closed unit ball."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if np.any(np.linalg.norm(x, axis=1) > 1.0 + 1e-12):
        raise ValueError("evaluation points must lie in the closed unit ball")
    out = np.full(len(x), atom.coeffs[0])
    if atom.n_poles:
        r = np.linalg.norm(x[:, None, :] - atom.poles[None, :, :], axis=-1)
        out += newton_kernel(atom.d, r) @ atom.coeffs[1:]
    return float(out[0]) if single else out


def fd_laplacian(f, x, h: float) -> float:
    """Central second-difference Laplacian of f at x (5-point in 2-d, 7-point in 3-d)."""
    x = np.asarray(x, dtype=float)
    d = x.size
    E = np.eye(d) * h
    pts = np.vstack([x[None, :], x + E, x - E])
    v = np.asarray(f(pts), dtype=float)
    return float((np.sum(v[1:]) - 2 * d * v[0]) / h**2)


def sphere_mean(f, center, radius: float, degree: int = 16) -> float:
    """Average of f over the sphere |x - center| = radius by a product rule."""
    rule = product_gauss_rule(len(center), degree)
    pts = np.asarray(center, dtype=float)[None, :] + radius * rule.points
    return float(np.dot(rule.weights, np.asarray(f(pts), dtype=float)) / np.sum(rule.weights))


def sphere_mean_mc(f, center, radius: float, n: int = 20000, seed=0) -> tuple[float, float]:
    """Monte Carlo average over |x - center| = radius and its standard error."""
    rng = np.random.default_rng(seed)
    u = normalize(rng.standard_normal((n, len(center))))
    v = np.asarray(f(np.asarray(center, dtype=float) + radius * u), dtype=float)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(n))


def harmonic_extension(f_coeffs: np.ndarray, x, d: int) -> np.ndarray | float:
    """sum_{k,nu} b_{k nu} |x|^k Y_{k nu}(x/|x|) for |x| < 1, coefficients in basis order."""
    _check_dim(d)
    c = np.asarray(f_coeffs, dtype=float)
    L = 0
    while poly_space_dim(L, d) < c.size:
        L += 1
    k = basis_degrees(L, d)
    if k.size != c.size:
        raise ValueError("coefficient vector does not fill a full degree band")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    r = np.linalg.norm(x, axis=1)
    if np.any(r >= 1.0):
        raise ValueError("harmonic extension is evaluated inside the open ball")
    u = np.where(r[:, None] > 0, x / np.where(r > 0, r, 1.0)[:, None], np.eye(d)[0])
    B = basis_matrix(L, u, d) * r[:, None] ** k[None, :]
    out = B @ c
    return float(out[0]) if single else out


def poisson_extension(f, x, d: int, degree: int = 64) -> np.ndarray | float:
    """int_S P(y, x) f(y) dy by a product rule of the given degree."""
    rule = product_gauss_rule(d, degree)
    fv = rule.weights * np.asarray(f(rule.points), dtype=float)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    P = poisson_kernel(d, rule.points[None, :, :], x[:, None, :])
    out = P @ fv
    return float(out[0]) if single else out


def boundary_coefficients(atom: NewtonianAtom, L: int, quad_degree: int | None = None) -> np.ndarray:
    """Harmonic coefficients up to degree L of the atom restricted to the sphere."""
    return harmonic_coefficients(lambda y: eval_atom(atom, y), atom.d, L, quad_degree or 4 * L + 16)


def _cluster_poles(center: np.ndarray, n_tilde: int, radius: float, spread: float, rng) -> np.ndarray:
    d = center.size
    pts = center[None, :] + spread * rng.standard_normal((n_tilde, d))
    return radius * normalize(pts)


def fit_atom(values_fn, d: int, poles: np.ndarray, degree: int) -> NewtonianAtom:
    """Least-squares fit of a_0, a_nu for given poles to boundary values on a product rule."""
    rule = product_gauss_rule(d, degree)
    w = np.sqrt(rule.weights)
    r = np.linalg.norm(rule.points[:, None, :] - poles[None, :, :], axis=-1)
    A = np.column_stack([np.ones(len(rule)), newton_kernel(d, r)])
    coef, *_ = np.linalg.lstsq(w[:, None] * A, w * values_fn(rule.points), rcond=None)
    return NewtonianAtom(poles, coef, d)


@dataclass
class AtomsDemoResult:
    n: int
    n_tilde: int
    selected: np.ndarray
    sequence_error: float
    boundary_error: float
    interior_error: float
    atom: NewtonianAtom

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "n_tilde": self.n_tilde,
            "n_atoms": int(self.atom.n_poles),
            "sequence_error_gq": self.sequence_error,
            "boundary_rel_l2_error": self.boundary_error,
            "interior_max_error": self.interior_error,
        }


def atoms_demo(sys: NeedletSystem, f, n: int, n_tilde: int, tau: float = 1.0, q: float = 2.0,
               pole_radius: float = 1.5, seed: int = 0) -> AtomsDemoResult:
    """Greedy n-term needlet selection followed by a Newtonian-atom fit of the selected sum.

    Each selected needlet contributes n_tilde poles clustered radially outside its
    center; one atom with n n_tilde poles is fitted to the boundary values of the
    needlet partial sum, and its harmonic extension is compared inside the ball.
    """
    rng = np.random.default_rng(seed)
    h = analyze(sys, f)
    res = greedy_select(h, n, tau, q)
    kept = h.without(np.setdiff1d(np.arange(h.tree.n_nodes), res.selected))
    P = synthesis_polynomial(sys, kept)
    spread = 0.5 / max(1.0, float(sys.tree.scale[res.selected].max())) if len(res.selected) else 0.1
    poles = [
        _cluster_poles(sys.tree.points[g], n_tilde, pole_radius, spread, rng) for g in res.selected
    ]
    poles = np.vstack(poles) if poles else np.zeros((0, sys.d))
    degree = 2 * P.L + 16
    atom = fit_atom(P, sys.d, poles, degree)
    rule = product_gauss_rule(sys.d, degree)
    diff = eval_atom(atom, rule.points) - P(rule.points)
    pn = np.sqrt(np.dot(rule.weights, P(rule.points) ** 2))
    b_err = float(np.sqrt(np.dot(rule.weights, diff**2)) / pn) if pn > 0 else 0.0
    xin = 0.5 * normalize(rng.standard_normal((20, sys.d)))
    inner = harmonic_extension(P.coeffs, xin, sys.d)
    i_err = float(np.max(np.abs(eval_atom(atom, xin) - inner)))
    return AtomsDemoResult(n, n_tilde, res.selected, res.error_gq, b_err, i_err, atom)
