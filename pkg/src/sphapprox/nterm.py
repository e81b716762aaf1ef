"""Nonlinear n-term approximation in g^q by tree thresholding.

The selection rule: with a = |h| and A_xi the subtree sums of a^tau, let
m = floor((n+3)/2) and Z1 = {xi : A_xi > A_root / m}.  Z1 is a finite rooted
subtree.  The selected set is the m-1 largest entries of a together with the
branching nodes of Z1 (nodes with more than one child in Z1), which has at
most 2m-3 <= n elements and achieves sigma_n <= c n^{-1/tau} ||h||_{l^tau}.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import combinations
from math import comb, inf

import numpy as np

from .needlets import CoeffSeq
from .seqnorms import norm_ell_tau, norm_g_q
from .tree import NestedTree

BRUTE_FORCE_MAX_SUPPORT = 16
BRUTE_FORCE_MAX_N = 4


@dataclass
class ApproxResult:
    n: int
    selected: np.ndarray  # global node indices
    error_gq: float
    q: float
    tau: float
    diagnostics: dict = field(default_factory=dict)


def subtree_sums(h: CoeffSeq, tau: float) -> CoeffSeq:
    """A_xi = sum over Q_eta in Q_xi of |h_eta|^tau."""
    return CoeffSeq(h.tree, h.tree.subtree_sum(np.abs(h.values) ** tau))


def _top_k(a: np.ndarray, nodes: np.ndarray, k: int) -> np.ndarray:
    """k largest a over nodes (positive entries only), ties by global order = (level, index)."""
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    pos = nodes[a[nodes] > 0]
    order = np.lexsort((pos, -a[pos]))
    return pos[order[:k]]


def _select_rooted(tree: NestedTree, a: np.ndarray, A: np.ndarray, comp: np.ndarray, root: int, n: int):
    """Selection inside the subtree `comp` rooted at `root` with budget n."""
    A_root = A[root]
    m = (n + 3) // 2
    diag = {"m": m, "A": float(A_root)}
    if A_root == 0 or n <= 0:
        diag.update(Z1=0, branching=0, minimal=0)
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), diag
    Z1 = comp[A[comp] > A_root / m]
    inZ = np.zeros(tree.n_nodes, dtype=bool)
    inZ[Z1] = True
    child_in = np.zeros(tree.n_nodes, dtype=np.int64)
    nonroot = Z1[tree.parent[Z1] >= 0]
    np.add.at(child_in, tree.parent[nonroot], 1)
    branching = Z1[child_in[Z1] > 1]
    minimal = Z1[child_in[Z1] == 0]
    top = _top_k(a, comp, m - 1)
    sel = np.union1d(top, branching)
    diag.update(Z1=int(Z1.size), branching=int(branching.size), minimal=int(minimal.size))
    return sel, Z1, diag


def greedy_select(h: CoeffSeq, n: int, tau: float, q: float = 1.0, fill: bool = True) -> ApproxResult:
    """Tree-thresholding selection of at most n indices.

    Forests (several roots, as for the two-sided dyadic line) are handled one
    component at a time with budget floor(n / #roots) each.  Branching nodes
    carrying a zero entry are dropped from the selection (removing them changes
    nothing).  With fill, the unused budget is spent on the largest remaining
    entries; g^q is monotone in |h|, so this never increases the error.
    diagnostics["core"] is the size of the tree-thresholding set before filling.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    tree = h.tree
    a = np.abs(h.values)
    A = tree.subtree_sum(a**tau)
    roots = tree.roots
    budget = n // len(roots)
    anc = tree.ancestor_table()
    sel_all, diags, trees = [], [], []
    for r in roots:
        comp = np.nonzero(anc[:, 0] == r)[0] if len(roots) > 1 else np.arange(tree.n_nodes)
        sel, Z1, dg = _select_rooted(tree, a, A, comp, int(r), budget)
        sel_all.append(sel)
        diags.append(dg)
        trees.append(Z1)
    core = np.unique(np.concatenate(sel_all)) if sel_all else np.empty(0, dtype=np.int64)
    selected = core[a[core] > 0]
    if fill and selected.size < n:
        rest = np.setdiff1d(np.arange(tree.n_nodes), selected)
        selected = np.union1d(selected, _top_k(a, rest, n - selected.size))
    err = norm_g_q(h.without(selected), q) if selected.size else norm_g_q(h, q)
    diag = diags[0] if len(diags) == 1 else {"components": diags}
    diag["Z1_sets"] = trees
    diag["core"] = int(core.size)
    return ApproxResult(n, selected, err, q, tau, diag)


def tree_mass_bound(tree: NestedTree, Z: np.ndarray, lam: float) -> tuple[float, float]:
    """(lhs, rhs) of sum_{Z minus branching}|Q| + lam/(1-lam) sum_{minimal}|Q| <= |Q_root|/(1-lam)
    for a finite rooted subtree Z."""
    Z = np.asarray(Z, dtype=np.int64)
    if Z.size == 0:
        return 0.0, 0.0
    inZ = np.zeros(tree.n_nodes, dtype=bool)
    inZ[Z] = True
    child_in = np.zeros(tree.n_nodes, dtype=np.int64)
    nonroot = Z[tree.parent[Z] >= 0]
    np.add.at(child_in, tree.parent[nonroot][inZ[tree.parent[nonroot]]], 1)
    root = Z[(tree.parent[Z] < 0) | ~inZ[np.maximum(tree.parent[Z], 0)]]
    if root.size != 1:
        raise ValueError("Z is not a rooted subtree")
    mu = tree.measure
    lhs = mu[Z[child_in[Z] <= 1]].sum() + lam / (1 - lam) * mu[Z[child_in[Z] == 0]].sum()
    return float(lhs), float(mu[root[0]] / (1 - lam))


def empirical_lambda(tree: NestedTree) -> float:
    """max |Q_eta| / |Q_xi| over parent-child pairs."""
    nr = tree.parent >= 0
    return float(np.max(tree.measure[nr] / tree.measure[tree.parent[nr]]))


def is_rooted_subtree(tree: NestedTree, Z: np.ndarray) -> bool:
    """Z is closed under taking parents (within the component of its root)."""
    inZ = np.zeros(tree.n_nodes, dtype=bool)
    inZ[Z] = True
    p = tree.parent[Z]
    return bool(np.all((p < 0) | inZ[np.maximum(p, 0)]))


# --------------------------------------------------------------------------
# exact optimum on small supports


class _ClosureEvaluator:
    """g^q norms of h restricted to subsets of a small support.

    Only nodes in the ancestor closure of the support have nonzero brackets,
    so the norm of every masked sequence is a max over that closure of
    (W @ (mask * a^q))^{1/q} with W[c, s] = |Q_s|/|Q_c| for s below c.
    """

    def __init__(self, h: CoeffSeq, q: float):
        tree = h.tree
        self.q = q
        self.supp = h.support
        self.a = np.abs(h.values[self.supp])
        closure = set(int(s) for s in self.supp)
        for s in self.supp:
            closure.update(tree.ancestors(int(s)))
        self.closure = np.array(sorted(closure), dtype=np.int64)
        anc = tree.ancestor_table()
        lev_c = tree.rel_level[self.closure]
        below = anc[self.supp][:, lev_c] == self.closure[None, :]  # (supp, closure)
        self.W = (below * tree.measure[self.supp][:, None] / tree.measure[self.closure][None, :]).T

    def norms(self, keep: np.ndarray) -> np.ndarray:
        """keep: (k, |support|) boolean masks of entries left in the residual."""
        if self.q == inf:
            return np.max(np.where(keep, self.a[None, :], 0.0), axis=1, initial=0.0)
        vals = (keep * self.a[None, :] ** self.q) @ self.W.T
        return np.max(vals, axis=1, initial=0.0) ** (1.0 / self.q)


def brute_force_sigma_n(h: CoeffSeq, n: int, q: float, return_set: bool = False):
    """min over index sets L of size <= n of ||h restricted off L||_{g^q}.

    Only subsets of the support need to be searched.  Guarded to supports of
    at most 16 entries and n <= 4.
    """
    supp = h.support
    if supp.size > BRUTE_FORCE_MAX_SUPPORT or n > BRUTE_FORCE_MAX_N:
        raise ValueError(
            f"brute force limited to support <= {BRUTE_FORCE_MAX_SUPPORT} and n <= {BRUTE_FORCE_MAX_N}"
        )
    if n < 0:
        raise ValueError("n must be nonnegative")
    k = supp.size
    if n >= k:
        return (0.0, supp.copy()) if return_set else 0.0
    ev = _ClosureEvaluator(h, q)
    subsets = [c for r in range(n + 1) for c in combinations(range(k), r)]
    keep = np.ones((len(subsets), k), dtype=bool)
    for i, c in enumerate(subsets):
        keep[i, list(c)] = False
    vals = ev.norms(keep)
    i = int(np.argmin(vals))
    if return_set:
        return float(vals[i]), supp[list(subsets[i])]
    return float(vals[i])


def bernstein_check(h: CoeffSeq, tau: float, q: float, rtol: float = 1e-12) -> bool:
    """||h||_{l^tau} <= n^{1/tau} ||h||_{g^q} with n = #nonzeros (constant 1; rtol absorbs rounding)."""
    n = h.nnz
    if n == 0:
        return True
    return norm_ell_tau(h, tau) <= n ** (1.0 / tau) * norm_g_q(h, q) * (1 + rtol)


# --------------------------------------------------------------------------
# random sequences and rate experiments


def random_sequence(
    tree: NestedTree,
    tau: float,
    rng: np.random.Generator,
    support: int | None = None,
    tail: float = 0.8,
    measure_scaled: bool = True,
) -> CoeffSeq:
    """Symmetric Pareto-type magnitudes on random nodes, normalized to ||h||_{l^tau} = 1.

    Magnitudes are U^{-1/alpha} with alpha = tail * tau, multiplied (when
    measure_scaled) by (|Q_eta| / max |Q|)^{1/alpha}, so that entries also decay
    with depth at the same index.  Without the depth factor, a full-support draw
    has a flat floor of deep entries that dominates g^q for q < tau over the n
    range of a desk-scale experiment.
    """
    support = tree.n_nodes if support is None else min(support, tree.n_nodes)
    alpha = tail * tau
    nodes = rng.choice(tree.n_nodes, size=support, replace=False)
    u = rng.uniform(size=support)
    mag = (1.0 - u) ** (-1.0 / alpha)
    if measure_scaled:
        mag = mag * (tree.measure[nodes] / tree.measure.max()) ** (1.0 / alpha)
    sign = rng.choice([-1.0, 1.0], size=support)
    vals = np.zeros(tree.n_nodes)
    vals[nodes] = sign * mag
    h = CoeffSeq(tree, vals)
    return h.scaled(1.0 / norm_ell_tau(h, tau))


def random_sparse(tree: NestedTree, n: int, rng: np.random.Generator, scale: str = "lognormal") -> CoeffSeq:
    """n nonzeros on uniformly random nodes.

    scale: "lognormal" (signed exp(2 N(0,1)), wide dynamic range), "uniform"
    (signed magnitudes in [0.1, 1]) or "equal" (all ones).
    """
    nodes = rng.choice(tree.n_nodes, size=min(n, tree.n_nodes), replace=False)
    vals = np.zeros(tree.n_nodes)
    if scale == "equal":
        vals[nodes] = 1.0
    elif scale == "uniform":
        vals[nodes] = rng.choice([-1.0, 1.0], size=nodes.size) * rng.uniform(0.1, 1.0, nodes.size)
    elif scale == "lognormal":
        vals[nodes] = rng.choice([-1.0, 1.0], size=nodes.size) * np.exp(2.0 * rng.standard_normal(nodes.size))
    else:
        raise ValueError(f"unknown scale {scale!r}")
    return CoeffSeq(tree, vals)


@dataclass
class RateTable:
    tau: float
    q: float
    rows: list  # (trial, n, sigma_greedy, sigma_oracle or None)
    slope: float
    intercept: float
    c_estimate: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "n", "sigma_greedy", "sigma_oracle_or_NA"])
        for t, n, sg, so in self.rows:
            w.writerow([t, n, repr(float(sg)), "NA" if so is None else repr(float(so))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"tau": self.tau, "q": self.q, "slope": self.slope, "intercept": self.intercept, "c_estimate": self.c_estimate}


def envelope(errors: np.ndarray) -> np.ndarray:
    """Running minimum over n: using fewer terms is always allowed, so this is still
    an n-term error."""
    return np.minimum.accumulate(errors)


def fit_loglog(n_grid: np.ndarray, sigma: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and intercept of log sigma against log n over trials, zeros dropped."""
    n_grid = np.asarray(n_grid, dtype=float)
    x, y = [], []
    for row in np.atleast_2d(sigma):
        ok = row > 0
        x.append(np.log(n_grid[ok]))
        y.append(np.log(row[ok]))
    x, y = np.concatenate(x), np.concatenate(y)
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def jackson_rate_experiment(
    tree: NestedTree,
    tau: float,
    q: float,
    n_grid,
    trials: int,
    seed: int = 0,
    support: int | None = None,
    tail: float = 0.8,
    measure_scaled: bool = True,
) -> RateTable:
    """Greedy sigma_n over random l^tau-normalized sequences and its log-log slope.

    Per-trial errors are replaced by their running minimum in n before fitting.
    c_estimate = max over trials and n of sigma_n n^{1/tau} / ||h||_{l^tau}.
    """
    n_grid = np.asarray(sorted(n_grid), dtype=int)
    rng = np.random.default_rng(seed)
    rows, sig = [], np.empty((trials, n_grid.size))
    for t in range(trials):
        h = random_sequence(tree, tau, np.random.default_rng(rng.integers(2**63)), support, tail, measure_scaled)
        errs = np.array([greedy_select(h, int(n), tau, q).error_gq for n in n_grid])
        sig[t] = envelope(errs)
        rows.extend((t, int(n), float(e), None) for n, e in zip(n_grid, sig[t]))
    slope, intercept = fit_loglog(n_grid, sig)
    c_est = float(np.max(sig * n_grid[None, :] ** (1.0 / tau)))
    return RateTable(tau, q, rows, slope, intercept, c_est)


def n_subsets(k: int, n: int) -> int:
    return sum(comb(k, r) for r in range(min(n, k) + 1))
