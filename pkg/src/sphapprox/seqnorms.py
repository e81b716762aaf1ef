"""Sequence-space norms on tree-indexed coefficients.

All norms take a CoeffSeq (values on the nodes of a NestedTree).  Subtree
aggregates are computed bottom-up with ``NestedTree.subtree_sum``, so each
norm costs O(#nodes).  ``tree.dim`` plays the role of d - 1 and
``tree.base`` the role of b.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf

import numpy as np

from .needlets import CoeffSeq
from .sphere_geom import cap_area, pairwise_distance


@dataclass(frozen=True)
class NormParams:
    s: float = 0.0
    p: float = 2.0
    q: float = 2.0
    tau: float = 1.0

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0 and self.tau > 0):
            raise ValueError("p, q, tau must be positive")


def tau_from_s(s: float, dim: int) -> float:
    """tau with 1/tau = s / dim (dim = d - 1 on the sphere)."""
    return dim / s


def s_from_tau(tau: float, dim: int) -> float:
    return dim / tau


def _abs(h: CoeffSeq) -> np.ndarray:
    return np.abs(h.values)


def norm_ell_tau(h: CoeffSeq | np.ndarray, tau: float) -> float:
    """(sum |h_xi|^tau)^{1/tau}; tau = inf gives the sup norm."""
    a = np.abs(h.values if isinstance(h, CoeffSeq) else np.asarray(h, dtype=float))
    if tau <= 0:
        raise ValueError("tau must be positive")
    if tau == inf:
        return float(a.max(initial=0.0))
    top = a.max(initial=0.0)
    if top == 0.0:
        return 0.0
    # factor out the max so tau < 1 does not underflow/overflow
    return float(top * np.sum((a / top) ** tau) ** (1.0 / tau))


def _power_mean(x: np.ndarray, r: float) -> float:
    if r == inf:
        return float(np.max(x, initial=0.0))
    return float(np.sum(x**r) ** (1.0 / r))


def norm_b_spq(h: CoeffSeq, s: float, p: float, q: float) -> float:
    """(sum_j [b^{j(s + dim(1/2 - 1/p))} ||h|_{X_j}||_{l^p}]^q)^{1/q}, sup forms at p or q = inf."""
    tree = h.tree
    a = _abs(h)
    inv_p = 0.0 if p == inf else 1.0 / p
    terms = []
    for j in range(tree.n_levels):
        lev = j + tree.level_min
        w = tree.base ** (lev * (s + tree.dim * (0.5 - inv_p)))
        terms.append(w * _power_mean(a[tree.level_slice(j)], p))
    return _power_mean(np.array(terms), q)


def f_infty_brackets(h: CoeffSeq, s: float, q: float) -> np.ndarray:
    """Per-node quantity whose supremum is the f^{sq}_inf norm.

    q < inf: ((1/|Q_xi|) sum_{Q_eta in Q_xi} [|Q_eta|^{-s/dim - 1/2} |h_eta|]^q |Q_eta|)^{1/q};
    q = inf: |Q_xi|^{-s/dim - 1/2} |h_xi|.
    """
    tree = h.tree
    mu = tree.measure
    t = mu ** (-s / tree.dim - 0.5) * _abs(h)
    if q == inf:
        return t
    S = tree.subtree_sum(t**q * mu)
    return (S / mu) ** (1.0 / q)


def norm_f_infty(h: CoeffSeq, s: float, q: float) -> float:
    return float(np.max(f_infty_brackets(h, s, q)))


def norm_f_infty_levels(h: CoeffSeq, s: float, q: float) -> float:
    """Level-weight form: sup_{xi in X_j} (sum_{eta below xi, eta in X_{j+k}}
    [b^{(j+k)(s + dim/2)} |h_eta|]^q b^{-k dim})^{1/q}, equivalent to norm_f_infty
    up to constants depending on the tree."""
    tree = h.tree
    lev = tree.level.astype(float)
    b, dim = tree.base, tree.dim
    t = b ** (lev * (s + dim / 2.0)) * _abs(h)
    if q == inf:
        return float(t.max())
    S = tree.subtree_sum(t**q * b ** (-lev * dim))
    return float(np.max((S * b ** (lev * dim)) ** (1.0 / q)))


def g_q_brackets(h: CoeffSeq, q: float) -> np.ndarray:
    """(sum_{Q_eta in Q_xi} |h_eta|^q |Q_eta| / |Q_xi|)^{1/q} per node xi (|h_xi| for q = inf)."""
    tree = h.tree
    a = _abs(h)
    if q == inf:
        return a
    mu = tree.measure
    return (tree.subtree_sum(a**q * mu) / mu) ** (1.0 / q)


def norm_g_q(h: CoeffSeq, q: float) -> float:
    """sup_xi (sum_{Q_eta in Q_xi} |h_eta|^q |Q_eta|/|Q_xi|)^{1/q}.

    This is the f^{0q}_inf norm of {|Q_eta|^{1/2} h_eta}; frame coefficients
    <f, psi_eta> enter g^q after multiplication by |Q_eta|^{-1/2}.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    return float(np.max(g_q_brackets(h, q)))


def to_g_scale(h: CoeffSeq) -> CoeffSeq:
    """{|Q_eta|^{-1/2} h_eta}, so that norm_g_q(to_g_scale(h)) = norm_f_infty(h, 0, q)."""
    return CoeffSeq(h.tree, h.values / np.sqrt(h.tree.measure))


def tail_profile(h: CoeffSeq, s: float, q: float) -> list[tuple[int, float]]:
    """(level j, sup over X_j of the f^{sq}_inf bracket); decay to 0 marks the separable subspace."""
    br = f_infty_brackets(h, s, q)
    tree = h.tree
    return [
        (j + tree.level_min, float(np.max(br[tree.level_slice(j)])))
        for j in range(tree.n_levels)
    ]


def norm_f_spq(
    h: CoeffSeq,
    s: float,
    p: float,
    q: float,
    gamma_bar: float | None = None,
    n_samples: int = 4096,
) -> float:
    """|| (sum_xi [|B_xi|^{-s/dim - 1/2} |h_xi| 1_{B_xi}]^q)^{1/q} ||_{L^p}, p < inf.

    Implemented for the circle (B_xi = B(xi, gamma_bar b^{-j+1})) and for the
    one-dimensional dyadic oracle (B_xi = the dyadic interval itself), by
    midpoint sampling of the domain.
    """
    tree = h.tree
    if p == inf:
        raise ValueError("use norm_f_infty for p = inf")
    supp = h.support
    a = np.abs(h.values[supp])
    lev = tree.level[supp].astype(float)
    if tree.kind == "dyadic" and tree.dim == 1:
        lo = -(2.0 ** -tree.level_min) if tree.level_min < 0 else 0.0
        hi = 2.0 ** -tree.level_min if tree.level_min < 0 else 1.0
        x = lo + (hi - lo) * (np.arange(n_samples) + 0.5) / n_samples
        cell = hi - lo
        size = 2.0 ** (-lev)
        left = tree.points[supp, 0] - size / 2
        inside = (x[:, None] >= left[None, :]) & (x[:, None] < (left + size)[None, :])
        vol = size
    elif tree.kind == "sphere" and tree.d == 2:
        if gamma_bar is None:
            raise ValueError("gamma_bar is required on the circle")
        t = 2 * np.pi * (np.arange(n_samples) + 0.5) / n_samples
        x = np.column_stack([np.cos(t), np.sin(t)])
        cell = 2 * np.pi
        radius = np.minimum(gamma_bar * tree.base ** (-lev + 1.0), np.pi)
        inside = pairwise_distance(x, tree.points[supp]) < radius[None, :]
        vol = np.array([cap_area(2, r) for r in radius])
    else:
        raise NotImplementedError("f^{sq}_p is available on the circle and the 1-d dyadic oracle")
    vals = vol ** (-s / tree.dim - 0.5) * a
    if q == inf:
        G = np.max(np.where(inside, vals[None, :], 0.0), axis=1, initial=0.0)
    else:
        G = np.sum(np.where(inside, vals[None, :] ** q, 0.0), axis=1) ** (1.0 / q)
    return float((np.sum(G**p) * cell / n_samples) ** (1.0 / p))
