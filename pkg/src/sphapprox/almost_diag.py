"""Almost-diagonal matrices Omega^{(K,M)} on tree-indexed sequences."""

from __future__ import annotations

from dataclasses import dataclass
from math import inf

import numpy as np

from .needlets import CoeffSeq
from .seqnorms import norm_f_infty
from .sphere_geom import pairwise_distance
from .tree import NestedTree, NodeId

DEFAULT_NODE_BUDGET = 20000
_ROW_CHUNK = 512


@dataclass(frozen=True)
class OmegaParams:
    """K (may be inf) and M; s and q are the norm parameters of the boundedness test."""

    K: float = 2.0
    M: float = 4.0
    s: float = 0.0
    q: float = 2.0


def boundedness_thresholds(s: float, q: float, dim: int) -> tuple[float, float]:
    """Lower bounds (K_min, M_min) under which Omega^{(K,M)} is bounded on f^{sq}_inf.

    For q = inf: K > |s|, M > dim.  For q < inf with q_* = min(q, 1):
    K > max{s q - dim(q_*/2 - q/2), -s q - dim(q_*/2 + q/2 - 1), dim q_*/2} / q_*
    and M > dim / q_*.
    """
    if q == inf:
        return abs(s), float(dim)
    qs = min(q, 1.0)
    k = max(s * q - dim * (qs / 2 - q / 2), -s * q - dim * (qs / 2 + q / 2 - 1), dim * qs / 2) / qs
    return k, dim / qs


def node_distance(tree: NestedTree, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Geodesic distance between node centers (Euclidean for dyadic trees)."""
    if tree.kind == "sphere":
        return pairwise_distance(tree.points[rows], tree.points[cols])
    diff = tree.points[rows][:, None, :] - tree.points[cols][None, :, :]
    return np.sqrt(np.sum(diff**2, axis=-1))


def _omega_block(params: OmegaParams, tree: NestedTree, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    N = tree.scale
    nr, nc = N[rows][:, None], N[cols][None, :]
    lo = np.minimum(nr, nc)
    rho = node_distance(tree, rows, cols)
    decay = (1.0 + lo * rho) ** (-params.M)
    if params.K == inf:
        return np.where(nr == nc, decay, 0.0)
    return (lo / np.maximum(nr, nc)) ** (params.K + tree.dim / 2.0) * decay


def omega_entry(params: OmegaParams, tree: NestedTree, xi: NodeId, eta: NodeId) -> float:
    """(min N / max N)^{K + dim/2} (1 + min N rho(xi, eta))^{-M}, with N = b^level;
    for K = inf the entry vanishes off the diagonal levels."""
    r = np.array([tree.index(xi)])
    c = np.array([tree.index(eta)])
    return float(_omega_block(params, tree, r, c)[0, 0])


def _check_budget(tree: NestedTree, node_budget: int) -> None:
    if tree.n_nodes > node_budget:
        raise ValueError(
            f"tree has {tree.n_nodes} nodes, above the dense-application budget {node_budget}"
        )


def apply_omega_many(params: OmegaParams, tree: NestedTree, H: np.ndarray, node_budget: int = DEFAULT_NODE_BUDGET) -> np.ndarray:
    """(Omega |H|) for a stack of sequences H of shape (n_nodes, k), rows in fixed order."""
    _check_budget(tree, node_budget)
    H = np.abs(np.asarray(H, dtype=float))
    squeeze = H.ndim == 1
    H = H.reshape(tree.n_nodes, -1)
    out = np.empty_like(H)
    cols = np.arange(tree.n_nodes)
    for s in range(0, tree.n_nodes, _ROW_CHUNK):
        rows = cols[s : s + _ROW_CHUNK]
        out[rows] = _omega_block(params, tree, rows, cols) @ H
    return out[:, 0] if squeeze else out


def apply_omega(params: OmegaParams, h: CoeffSeq, node_budget: int = DEFAULT_NODE_BUDGET) -> CoeffSeq:
    """(Omega h)_xi = sum_eta omega_{xi,eta} |h_eta| by dense summation."""
    return CoeffSeq(h.tree, apply_omega_many(params, h.tree, h.values, node_budget))


def row_sums(params: OmegaParams, tree: NestedTree, node_budget: int = DEFAULT_NODE_BUDGET) -> np.ndarray:
    """sum_eta omega_{xi,eta} for every xi."""
    return apply_omega_many(params, tree, np.ones(tree.n_nodes), node_budget)


def random_f_sequences(tree: NestedTree, k: int, s: float, seed=0) -> np.ndarray:
    """k random sequences with entries |Q_eta|^{s/dim + 1/2} g_eta, g standard normal,
    so every f^{sq}_inf bracket is of order one at all depths."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((tree.n_nodes, k))
    return (tree.measure ** (s / tree.dim + 0.5))[:, None] * g


def boundedness_ratios(params: OmegaParams, tree: NestedTree, H: np.ndarray, node_budget: int = DEFAULT_NODE_BUDGET) -> np.ndarray:
    """||Omega h||_{f^{sq}_inf} / ||h||_{f^{sq}_inf} for each column h of H."""
    OH = apply_omega_many(params, tree, H, node_budget)
    out = []
    for i in range(H.shape[1]):
        num = norm_f_infty(CoeffSeq(tree, OH[:, i]), params.s, params.q)
        den = norm_f_infty(CoeffSeq(tree, H[:, i]), params.s, params.q)
        out.append(num / den)
    return np.array(out)
