"""Discrete BMO / VMO norms on caps and the comparison with the F^{02}_inf coefficient norm."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .cubature import CubatureRule, product_gauss_rule
from .harmonics import (
    SphericalPolynomial,
    basis_degrees,
    basis_matrix,
    eval_lambda_kernel,
    lambda_kernel,
    poly_space_dim,
    smooth_step,
)
from .needlets import NeedletSystem, analyze
from .nets import build_maximal_net
from .seqnorms import norm_f_infty
from .sphere_geom import Cap, SpherePoint, e1

MIN_NODES_PER_CAP = 30


@dataclass
class CapGrid:
    """All caps B(c, r) for c in centers and r in radii."""

    centers: np.ndarray
    radii: np.ndarray

    @property
    def caps(self) -> list[Cap]:
        return [Cap(SpherePoint(c), float(r)) for r in self.radii for c in self.centers]


def default_cap_grid(d: int, rule: CubatureRule, n_radii: int = 16, center_delta: float | None = None) -> CapGrid:
    """Centers on a net, radii log-spaced from the smallest radius holding about
    MIN_NODES_PER_CAP rule nodes up to pi."""
    n = len(rule)
    frac = MIN_NODES_PER_CAP / n
    if d == 2:
        rmin = np.pi * frac * 1.05
    else:
        rmin = np.arccos(1 - 2 * frac) * 1.05
    radii = np.geomspace(rmin, np.pi, n_radii)
    delta = rmin if center_delta is None else center_delta
    centers = build_maximal_net(d, min(delta, np.pi)).points
    return CapGrid(centers, radii)


@dataclass
class BmoEstimate:
    value_q1: float
    value_q2: float
    mean: float
    per_radius_profile: list  # (r, sup oscillation q=1, sup oscillation q=2)
    undersampled: int = 0
    caps: CapGrid | None = field(default=None, repr=False)

    def value(self, q: int) -> float:
        return self.value_q1 if q == 1 else self.value_q2


def _values(f, pts):
    if callable(f):
        return np.asarray(f(pts), dtype=float)
    return np.asarray(f, dtype=float)


def cap_oscillations(fv: np.ndarray, rule: CubatureRule, centers: np.ndarray, radius: float):
    """Mean oscillations (q = 1, 2) over caps B(c, radius), using the rule's weights
    inside each cap, renormalized.  Returns (osc1, osc2, node counts)."""
    cosr = np.cos(radius)
    osc1 = np.empty(len(centers))
    osc2 = np.empty(len(centers))
    counts = np.empty(len(centers), dtype=np.int64)
    chunk = max(1, 4_000_000 // len(rule))
    for s in range(0, len(centers), chunk):
        inside = (centers[s : s + chunk] @ rule.points.T) > cosr
        if radius >= np.pi:
            inside[:] = True
        w = inside * rule.weights[None, :]
        tot = w.sum(axis=1)
        avg = (w @ fv) / tot
        dev = fv[None, :] - avg[:, None]
        osc1[s : s + chunk] = np.sum(w * np.abs(dev), axis=1) / tot
        osc2[s : s + chunk] = np.sqrt(np.sum(w * dev**2, axis=1) / tot)
        counts[s : s + chunk] = inside.sum(axis=1)
    return osc1, osc2, counts


def bmo_norm_discrete(f, rule: CubatureRule, caps: CapGrid) -> BmoEstimate:
    """|avg_S f| + sup over caps of the mean oscillation, for q = 1 and q = 2.

    Caps holding fewer than MIN_NODES_PER_CAP rule nodes trigger a warning.
    """
    fv = _values(f, rule.points)
    mean = float(np.dot(rule.weights, fv) / np.sum(rule.weights))
    prof = []
    under = 0
    for r in np.sort(caps.radii):
        o1, o2, cnt = cap_oscillations(fv, rule, caps.centers, float(r))
        under += int(np.sum(cnt < MIN_NODES_PER_CAP))
        prof.append((float(r), float(o1.max()), float(o2.max())))
    if under:
        warnings.warn(f"{under} caps contain fewer than {MIN_NODES_PER_CAP} quadrature nodes", RuntimeWarning)
    sup1 = max(p[1] for p in prof)
    sup2 = max(p[2] for p in prof)
    return BmoEstimate(abs(mean) + sup1, abs(mean) + sup2, mean, prof, under, caps)


def vmo_decay_profile(est: BmoEstimate, q: int = 2) -> list[tuple[float, float]]:
    """sup of the oscillation over caps of radius <= delta, as a function of delta."""
    col = 1 if q == 1 else 2
    out, run = [], 0.0
    for p in est.per_radius_profile:
        run = max(run, p[col])
        out.append((p[0], run))
    return out


def f02_norm_via_coeffs(sys: NeedletSystem, f) -> float:
    """sup_xi ((1/|Q_xi|) sum_{Q_eta in Q_xi} <f, psi_eta>^2)^{1/2}."""
    return norm_f_infty(analyze(sys, f), 0.0, 2.0)


# --------------------------------------------------------------------------
# test suite and the equivalence experiment


def zonal_spike(d: int, N: float, center=None) -> SphericalPolynomial:
    """Lambda_N(x . center) with a smooth low-pass profile (1 on [0,1], 0 beyond 2),
    scaled to peak value 1, as an explicit polynomial."""
    center = e1(d) if center is None else np.asarray(center, dtype=float)
    lam = lambda t: 1.0 - smooth_step(np.asarray(t) - 1.0)  # noqa: E731
    kern = lambda_kernel(lam, N, d, 2.0)
    L = len(kern.coeffs) - 1
    # Z_k(x . c) = sum_nu Y_{k nu}(c) Y_{k nu}(x)
    yc = basis_matrix(L, center[None, :], d)[0]
    k = basis_degrees(L, d)
    coeffs = np.asarray(kern.coeffs)[k] * yc
    peak = eval_lambda_kernel(kern, 1.0)
    return SphericalPolynomial(d, L, coeffs / peak)


def _circle_poly(L: int, cos_coef: dict, sin_coef: dict | None = None, const: float = 0.0) -> SphericalPolynomial:
    """Polynomial on the circle from coefficients of cos(k phi), sin(k phi) and a constant."""
    c = np.zeros(poly_space_dim(L, 2))
    c[0] = const * np.sqrt(2 * np.pi)
    for k, v in cos_coef.items():
        c[2 * k - 1] = v * np.sqrt(np.pi)
    for k, v in (sin_coef or {}).items():
        c[2 * k] = v * np.sqrt(np.pi)
    return SphericalPolynomial(2, L, c)


def circle_test_suite(J: int, b: int = 4, seed: int = 0) -> list[tuple[str, SphericalPolynomial]]:
    """Eight band-limited functions on the circle of degree <= b^{J-1}:
    constant, cos, sin 2phi, constant + cos, random degree-4 polynomial,
    zonal spike at scale b^{J-2}, lacunary sum of cos(b^j phi), and the
    partial sum of log(1/|2 sin(phi/2)|)."""
    L = b ** (J - 1)
    rng = np.random.default_rng(seed)
    lac_terms = list(range(0, J - 1))
    suite = [
        ("constant", _circle_poly(L, {}, const=1.0)),
        ("cos", _circle_poly(L, {1: 1.0})),
        ("sin2", _circle_poly(L, {}, {2: 1.0})),
        ("const_plus_cos", _circle_poly(L, {1: 1.0}, const=2.0)),
        ("random_deg4", _circle_poly(L, {k: rng.standard_normal() for k in range(1, 5)},
                                     {k: rng.standard_normal() for k in range(1, 5)}, const=0.3)),
        ("zonal_spike", _pad(zonal_spike(2, b ** (J - 2) / 2.0), L)),
        ("lacunary", _circle_poly(L, {b**j: 1.0 for j in lac_terms})),
        ("log_partial", _circle_poly(L, {k: 1.0 / k for k in range(1, L + 1)})),
    ]
    return suite


def _pad(p: SphericalPolynomial, L: int) -> SphericalPolynomial:
    if p.L > L:
        raise ValueError("polynomial exceeds the band limit")
    c = np.zeros(poly_space_dim(L, p.d))
    c[: p.coeffs.size] = p.coeffs
    return SphericalPolynomial(p.d, L, c)


@dataclass
class EquivalenceTable:
    names: list
    bmo: np.ndarray
    f02: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        return self.bmo / self.f02

    @property
    def band(self) -> float:
        r = self.ratios
        return float(r.max() / r.min())

    def to_csv(self) -> str:
        lines = ["name,bmo,f02,ratio"]
        for n, a, c, r in zip(self.names, self.bmo, self.f02, self.ratios):
            lines.append(f"{n},{float(a)!r},{float(c)!r},{float(r)!r}")
        return "\n".join(lines) + "\n"


def bmo_f02_equivalence_experiment(
    sys: NeedletSystem,
    suite: list,
    rule: CubatureRule | None = None,
    caps: CapGrid | None = None,
    q: int = 2,
) -> EquivalenceTable:
    """Ratio ||f||_BMO / ||f||_{F^{02}_inf} for each function of the suite."""
    d = sys.d
    L = max(f.L for _, f in suite)
    if rule is None:
        rule = dense_rule(d, L)
    if caps is None:
        caps = default_cap_grid(d, rule)
    bmo, f02 = [], []
    for _, f in suite:
        bmo.append(bmo_norm_discrete(f, rule, caps).value(q))
        f02.append(f02_norm_via_coeffs(sys, f))
    return EquivalenceTable([n for n, _ in suite], np.array(bmo), np.array(f02))


def dense_rule(d: int, L: int, oversample: int = 16) -> CubatureRule:
    """A product rule much finer than degree L, for cap averages of degree-L functions."""
    return product_gauss_rule(d, oversample * max(L, 8))
