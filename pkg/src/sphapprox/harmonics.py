"""Orthogonal polynomials and zonal kernels on S^{d-1}.

Everything here is evaluated through three-term recurrences:

* Gegenbauer C_k^mu and Chebyshev T_k polynomials,
* the projector kernels Z_k(x . y) onto spherical harmonics of degree k,
* band-limited kernels Lambda_N(u) = sum_k lam(k/N) Z_k(u) (Clenshaw summation),
* an explicit real orthonormal basis Y_{k nu} for d = 2 and d = 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, comb, pi
from typing import Callable

import numpy as np
from scipy.special import binom

from .sphere_geom import _check_dim, normalize, sphere_area, to_spherical

# --------------------------------------------------------------------------
# polynomials


def gegenbauer(k: int, mu: float, u):
    """C_k^mu(u) via the three-term recurrence.

    Normalized so that C_k^mu(1) = binom(k + 2 mu - 1, k).
    """
    if k < 0:
        raise ValueError("degree must be nonnegative")
    if mu <= 0:
        raise ValueError("mu must be positive")
    u = np.asarray(u, dtype=float)
    c_prev = np.ones_like(u)
    if k == 0:
        return c_prev if c_prev.ndim else float(c_prev)
    c = 2.0 * mu * u
    for n in range(1, k):
        c_prev, c = c, (2.0 * (n + mu) * u * c - (n + 2.0 * mu - 1.0) * c_prev) / (n + 1.0)
    return c if c.ndim else float(c)


def gegenbauer_at_one(k: int, mu: float) -> float:
    return float(binom(k + 2.0 * mu - 1.0, k))


def chebyshev_t(k: int, u):
    u = np.asarray(u, dtype=float)
    t_prev = np.ones_like(u)
    if k == 0:
        return t_prev if t_prev.ndim else float(t_prev)
    t = u.copy()
    for _ in range(1, k):
        t_prev, t = t, 2.0 * u * t - t_prev
    return t if t.ndim else float(t)


def basis_dim(k: int, d: int) -> int:
    """dim H_k on S^{d-1}."""
    if k == 0:
        return 1
    if d == 2:
        return 2
    return (2 * k + d - 2) * comb(k + d - 3, k - 1) // k


def poly_space_dim(n: int, d: int) -> int:
    """dim Pi_n = sum_{k <= n} dim H_k."""
    if d == 2:
        return 2 * n + 1
    if d == 3:
        return (n + 1) ** 2
    return sum(basis_dim(k, d) for k in range(n + 1))


def _mu(d: int) -> float:
    return (d - 2) / 2.0


def zonal_projector(k: int, d: int, u):
    """Kernel Z_k(u) of the orthogonal projector onto H_k, with u = x . y."""
    _check_dim(d)
    u = np.asarray(u, dtype=float)
    if d == 2:
        if k == 0:
            out = np.full_like(u, 1.0 / (2.0 * pi))
        else:
            out = chebyshev_t(k, u) / pi
    else:
        mu = _mu(d)
        out = (k + mu) / (mu * sphere_area(d)) * gegenbauer(k, mu, u)
    out = np.asarray(out)
    return out if out.ndim else float(out)


def _recurrence_coeffs(K: int, d: int):
    """Coefficients (A, B) of P_{k+1} = A_k u P_k - B_k P_{k-1}, P_0 = 1, P_1 = A_0 u,
    together with the scale factors turning P_k into Z_k."""
    k = np.arange(K + 2, dtype=float)
    if d == 2:
        A = np.full(K + 2, 2.0)
        A[0] = 1.0
        B = np.ones(K + 2)
        scale = np.full(K + 1, 1.0 / pi)
        scale[0] = 1.0 / (2.0 * pi)
    else:
        mu = _mu(d)
        A = 2.0 * (k + mu) / (k + 1.0)
        B = (k + 2.0 * mu - 1.0) / (k + 1.0)
        scale = (k[: K + 1] + mu) / (mu * sphere_area(d))
    return A, B, scale


def clenshaw(a: np.ndarray, d: int, u) -> np.ndarray:
    """sum_k a_k P_k(u) where P_k is the Gegenbauer (d >= 3) or Chebyshev (d = 2)
    family underlying Z_k."""
    a = np.asarray(a, dtype=float)
    u = np.asarray(u, dtype=float)
    K = a.size - 1
    A, B, _ = _recurrence_coeffs(K, d)
    b1 = np.zeros_like(u)
    b2 = np.zeros_like(u)
    for k in range(K, -1, -1):
        b1, b2 = a[k] + A[k] * u * b1 - B[k + 1] * b2, b1
    return b1


# --------------------------------------------------------------------------
# smooth cutoffs


def _sigma(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity transition: 0 for t <= 0, 1 for t >= 1."""
    num = _sigma(t)
    return num / (num + _sigma(1.0 - np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class CutoffPair:
    """Needlet window a_hat with supp in [1/b, b] and a_hat^2(u) + a_hat^2(u/b) = 1
    on [1, b]; the Littlewood-Paley window phi is taken equal to a_hat."""

    b: float

    def ahat(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        lb = np.log(self.b)
        rise = (u > 1.0 / self.b) & (u <= 1.0)
        fall = (u > 1.0) & (u < self.b)
        with np.errstate(divide="ignore"):
            out[rise] = np.sin(0.5 * pi * smooth_step(np.log(u[rise]) / lb + 1.0))
            out[fall] = np.cos(0.5 * pi * smooth_step(np.log(u[fall]) / lb))
        return out if out.ndim else float(out)

    def phi(self, u):
        return self.ahat(u)

    def partition_sum(self, u, terms: int = 64):
        """sum_{nu=0}^{terms-1} a_hat^2(b^{-nu} u)."""
        u = np.asarray(u, dtype=float)
        scales = self.b ** -np.arange(terms, dtype=float)
        return np.sum(self.ahat(np.multiply.outer(u, scales)) ** 2, axis=-1)


def build_cutoffs(b: float) -> CutoffPair:
    if not b > 1:
        raise ValueError("b must exceed 1")
    return CutoffPair(float(b))


# --------------------------------------------------------------------------
# band-limited zonal kernels


@dataclass(frozen=True)
class ZonalKernel:
    """Lambda_N(u) = sum_{k=0}^{K} lam(k/N) Z_k(u), stored by its coefficients."""

    N: float
    coeffs: tuple[float, ...]
    d: int

    @property
    def mu(self) -> float:
        return _mu(self.d)

    @property
    def degree(self) -> int:
        nz = np.nonzero(np.asarray(self.coeffs))[0]
        return int(nz[-1]) if nz.size else 0

    def __call__(self, u):
        return eval_lambda_kernel(self, u)

    def at_one(self) -> float:
        return float(eval_lambda_kernel(self, 1.0))


def lambda_kernel(lam: Callable, N: float, d: int, support: float) -> ZonalKernel:
    """Kernel with coefficients lam(k/N), truncated where lam vanishes (k > support*N)."""
    _check_dim(d)
    K = int(ceil(support * N))
    k = np.arange(K + 1, dtype=float)
    c = np.asarray(lam(k / N), dtype=float)
    return ZonalKernel(float(N), tuple(float(v) for v in c), d)


def needlet_kernel(j: int, cutoffs: CutoffPair, d: int) -> ZonalKernel:
    """Psi_0 = Z_0 and Psi_j = sum_k a_hat(k / b^{j-1}) Z_k for j >= 1."""
    if j == 0:
        return ZonalKernel(1.0, (1.0,), d)
    return lambda_kernel(cutoffs.ahat, cutoffs.b ** (j - 1), d, cutoffs.b)


def eval_lambda_kernel(kern: ZonalKernel, u):
    c = np.asarray(kern.coeffs, dtype=float)
    _, _, scale = _recurrence_coeffs(c.size - 1, kern.d)
    out = clenshaw(c * scale, kern.d, u)
    return out if np.ndim(out) else float(out)


def kernel_localization_ratio(kern: ZonalKernel, M: float, thetas) -> float:
    """max over thetas of |Lambda_N(cos theta)| (1 + N theta)^M / N^{d-1}."""
    thetas = np.asarray(thetas, dtype=float)
    vals = np.abs(eval_lambda_kernel(kern, np.cos(thetas)))
    return float(np.max(vals * (1.0 + kern.N * thetas) ** M / kern.N ** (kern.d - 1)))


# --------------------------------------------------------------------------
# explicit real orthonormal bases


@dataclass(frozen=True)
class BasisIndex:
    """Degree k and 1-based order nu in 1..dim H_k."""

    k: int
    nu: int

    def flat(self, d: int) -> int:
        if not 1 <= self.nu <= basis_dim(self.k, d):
            raise ValueError(f"order {self.nu} out of range for degree {self.k}")
        if d == 2:
            return 0 if self.k == 0 else 2 * self.k - 2 + self.nu
        return self.k * self.k + self.nu - 1


def basis_indices(L: int, d: int) -> list[BasisIndex]:
    return [BasisIndex(k, nu) for k in range(L + 1) for nu in range(1, basis_dim(k, d) + 1)]


def basis_degrees(L: int, d: int) -> np.ndarray:
    return np.array([idx.k for idx in basis_indices(L, d)])


def basis_matrix(L: int, x: np.ndarray, d: int | None = None) -> np.ndarray:
    """Values Y_{k nu}(x_i) for all k <= L, as an (n_points, dim Pi_L) array.

    Order within degree k: for d = 2, (cos k phi, sin k phi); for d = 3,
    m = 0 first, then the (cos m phi, sin m phi) pairs for m = 1..k.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1] if d is None else d
    _check_dim(d)
    n = x.shape[0]
    out = np.empty((n, poly_space_dim(L, d)))
    if d == 2:
        phi = np.arctan2(x[:, 1], x[:, 0])
        out[:, 0] = 1.0 / np.sqrt(2.0 * pi)
        for k in range(1, L + 1):
            out[:, 2 * k - 1] = np.cos(k * phi) / np.sqrt(pi)
            out[:, 2 * k] = np.sin(k * phi) / np.sqrt(pi)
        return out

    z, phi = to_spherical(x)
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    cos_m = [np.ones(n)] + [np.cos(m * phi) for m in range(1, L + 1)]
    sin_m = [np.zeros(n)] + [np.sin(m * phi) for m in range(1, L + 1)]
    root2 = np.sqrt(2.0)
    # normalized associated Legendre functions, column m, running over l
    pmm = np.full(n, 1.0 / np.sqrt(4.0 * pi))
    for m in range(L + 1):
        if m > 0:
            pmm = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        p_lm2 = None
        p_lm1 = pmm
        for l in range(m, L + 1):
            if l == m:
                p = pmm
            elif l == m + 1:
                p = np.sqrt(2.0 * m + 3.0) * z * pmm
            else:
                a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                bb = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
                p = a * (z * p_lm1 - bb * p_lm2)
            if l > m:
                p_lm2, p_lm1 = p_lm1, p
            base = l * l
            if m == 0:
                out[:, base] = p
            else:
                out[:, base + 2 * m - 1] = root2 * p * cos_m[m]
                out[:, base + 2 * m] = root2 * p * sin_m[m]
    return out


def sph_basis_eval(idx: BasisIndex, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    d = x.shape[-1]
    vals = basis_matrix(idx.k, np.atleast_2d(x), d)[:, idx.flat(d)]
    return float(vals[0]) if single else vals


@dataclass
class SphericalPolynomial:
    """f = sum c_{k nu} Y_{k nu}, coefficients in the order of basis_matrix."""

    d: int
    L: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.size != poly_space_dim(self.L, self.d):
            raise ValueError("coefficient vector does not match dim Pi_L")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        vals = basis_matrix(self.L, np.atleast_2d(x), self.d) @ self.coeffs
        return float(vals[0]) if x.ndim == 1 else vals

    @property
    def band(self) -> int:
        deg = basis_degrees(self.L, self.d)
        nz = np.nonzero(self.coeffs)[0]
        return int(deg[nz].max()) if nz.size else 0

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def degree_component(self, k: int) -> "SphericalPolynomial":
        c = np.where(basis_degrees(self.L, self.d) == k, self.coeffs, 0.0)
        return SphericalPolynomial(self.d, self.L, c)

    @classmethod
    def single(cls, idx: BasisIndex, d: int, scale: float = 1.0) -> "SphericalPolynomial":
        c = np.zeros(poly_space_dim(idx.k, d))
        c[idx.flat(d)] = scale
        return cls(d, idx.k, c)

    @classmethod
    def random(cls, d: int, L: int, seed=0) -> "SphericalPolynomial":
        rng = np.random.default_rng(seed)
        return cls(d, L, rng.standard_normal(poly_space_dim(L, d)))


# --------------------------------------------------------------------------
# Poisson kernel


def poisson_kernel(d: int, y, x) -> np.ndarray | float:
    """P(y, x) = (1 - |x|^2) / (omega_d |x - y|^d) for |x| < 1 and y on the sphere."""
    _check_dim(d)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    if np.any(r2 >= 1.0):
        raise ValueError("Poisson kernel requires |x| < 1")
    dist = np.linalg.norm(x - y, axis=-1)
    out = (1.0 - r2) / (sphere_area(d) * dist**d)
    return out if np.ndim(out) else float(out)


def poisson_series(d: int, y, x, K: int) -> float:
    """Truncated expansion sum_{k <= K} |x|^k Z_k(x/|x| . y)."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r >= 1.0:
        raise ValueError("Poisson kernel requires |x| < 1")
    if r == 0.0:
        return float(zonal_projector(0, d, 1.0))
    u = float(np.dot(normalize(x), np.asarray(y, dtype=float)))
    return float(sum(r**k * zonal_projector(k, d, u) for k in range(K + 1)))
