"""Nested multilevel structures {Q_xi}: spherical "dyadic cubes" and Euclidean dyadic cubes.

Nodes are stored level by level in flat arrays; node ``g`` at level ``j`` has
local index ``g - offsets[j]``.  Sets Q_xi are never materialized: the tree
exposes parent links, a membership test for the truncated union defining
Q_xi, and measures |Q_xi| accumulated bottom-up so that additivity holds
exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from math import pi

import numpy as np
from scipy.spatial import cKDTree

from .nets import DIST_RTOL, CellPartition, LevelNet, build_maximal_net, voronoi_partition
from .sphere_geom import _check_dim, chord_from_geodesic, e1, pairwise_distance, sphere_area


@dataclass(frozen=True)
class TreeParams:
    """b: refinement base; betaw: inner-cap factor; gamma: level-0 scale with
    delta_j = gamma * b^{-j}; J: deepest level."""

    b: int = 4
    betaw: float = 1.0 / 12.0
    gamma: float = 0.5
    J: int = 3

    def __post_init__(self):
        if self.b < 4:
            raise ValueError(f"b must be an integer >= 4, got {self.b}")
        if 1.0 / (self.b - 1) + 2.0 * self.betaw > 0.5 + 1e-15:
            raise ValueError(
                f"need 1/(b-1) + 2*betaw <= 1/2; got b={self.b}, betaw={self.betaw} "
                f"(value {1.0 / (self.b - 1) + 2.0 * self.betaw:.4g})"
            )
        if self.gamma <= 0 or self.J < 0:
            raise ValueError("gamma must be positive and J nonnegative")

    def delta(self, j: int) -> float:
        return self.gamma * float(self.b) ** (-j)


@dataclass(frozen=True)
class NodeId:
    level: int
    index: int


@dataclass
class NestedTree:
    """Multilevel index set with parent links and node measures.

    Attributes
    ----------
    points : (n_nodes, d) array
        Node centers (net points on the sphere, cube centers for dyadic trees).
    offsets : (n_levels + 1,) int array
        Start of each level in the flat node order.
    parent : (n_nodes,) int array
        Global parent index, -1 for roots.
    measure : (n_nodes,) float array
        |Q_xi|; NaN until measures are computed.
    dim : int
        Dimension of the underlying domain (d - 1 on the sphere).
    base : float
        Scale factor per level, N_xi = base^level.
    level_min : int
        Level number of the first stored level (negative for two-sided forests).
    """

    points: np.ndarray
    offsets: np.ndarray
    parent: np.ndarray
    measure: np.ndarray
    dim: int
    base: float
    kind: str = "sphere"
    level_min: int = 0
    params: TreeParams | None = None
    deltas: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # ---- sizes and indexing -------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return int(self.offsets[-1])

    def __len__(self) -> int:
        return self.n_nodes

    @property
    def n_levels(self) -> int:
        return len(self.offsets) - 1

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def level_sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def level_slice(self, j: int) -> slice:
        """Slice of stored level j (0-based storage index)."""
        return slice(int(self.offsets[j]), int(self.offsets[j + 1]))

    @property
    def rel_level(self) -> np.ndarray:
        if "rel_level" not in self._cache:
            self._cache["rel_level"] = np.repeat(np.arange(self.n_levels), self.level_sizes())
        return self._cache["rel_level"]

    @property
    def level(self) -> np.ndarray:
        """Level number n of every node (xi in X_n)."""
        return self.rel_level + self.level_min

    def node_id(self, g: int) -> NodeId:
        j = int(self.rel_level[g])
        return NodeId(j + self.level_min, int(g - self.offsets[j]))

    def index(self, node: NodeId) -> int:
        j = node.level - self.level_min
        if not (0 <= j < self.n_levels and 0 <= node.index < self.level_sizes()[j]):
            raise IndexError(f"{node} is not a node of this tree")
        return int(self.offsets[j] + node.index)

    @property
    def roots(self) -> np.ndarray:
        return np.nonzero(self.parent < 0)[0]

    @property
    def scale(self) -> np.ndarray:
        """N_xi = base^level."""
        return float(self.base) ** self.level.astype(float)

    # ---- structure ----------------------------------------------------------
    def _children_csr(self):
        if "csr" not in self._cache:
            nonroot = np.nonzero(self.parent >= 0)[0]
            order = nonroot[np.argsort(self.parent[nonroot], kind="stable")]
            counts = np.bincount(self.parent[nonroot], minlength=self.n_nodes)
            ptr = np.concatenate([[0], np.cumsum(counts)])
            self._cache["csr"] = (ptr, order)
        return self._cache["csr"]

    def children(self, g: int) -> np.ndarray:
        ptr, idx = self._children_csr()
        return idx[ptr[g] : ptr[g + 1]]

    @property
    def n_children(self) -> np.ndarray:
        ptr, _ = self._children_csr()
        return np.diff(ptr)

    def ancestor_table(self) -> np.ndarray:
        """(n_nodes, n_levels) table; entry [g, k] is the ancestor of g at stored
        level k (g itself at its own level), -1 where undefined."""
        if "anc" not in self._cache:
            anc = np.full((self.n_nodes, self.n_levels), -1, dtype=np.int64)
            for j in range(self.n_levels):
                sl = self.level_slice(j)
                anc[sl, j] = np.arange(sl.start, sl.stop)
                if j > 0:
                    p = self.parent[sl]
                    ok = p >= 0
                    rows = np.arange(sl.start, sl.stop)[ok]
                    anc[rows, :j] = anc[p[ok], :j]
            self._cache["anc"] = anc
        return self._cache["anc"]

    def descendants(self, g: int, include_self: bool = True) -> np.ndarray:
        """All eta with Q_eta contained in Q_g, in level order."""
        j = int(self.rel_level[g])
        out = np.nonzero(self.ancestor_table()[:, j] == g)[0]
        return out if include_self else out[out != g]

    def ancestors(self, g: int) -> list[int]:
        out = []
        p = int(self.parent[g])
        while p >= 0:
            out.append(p)
            p = int(self.parent[p])
        return out

    def subtree_sum(self, values: np.ndarray) -> np.ndarray:
        """S_xi = sum over eta with Q_eta in Q_xi of values[eta], bottom-up."""
        acc = np.array(values, dtype=float, copy=True)
        for j in range(self.n_levels - 1, 0, -1):
            sl = self.level_slice(j)
            p = self.parent[sl]
            ok = p >= 0
            acc += np.bincount(p[ok], weights=acc[sl][ok], minlength=self.n_nodes)
        return acc

    def subtree_max(self, values: np.ndarray) -> np.ndarray:
        acc = np.array(values, dtype=float, copy=True)
        for j in range(self.n_levels - 1, 0, -1):
            sl = self.level_slice(j)
            p = self.parent[sl]
            ok = p >= 0
            np.maximum.at(acc, p[ok], acc[sl][ok])
        return acc

    def with_measures(self, measure: np.ndarray) -> "NestedTree":
        return NestedTree(
            self.points, self.offsets, self.parent, np.asarray(measure, dtype=float),
            self.dim, self.base, self.kind, self.level_min, self.params, self.deltas,
        )

    # ---- serialization --------------------------------------------------------
    def to_json(self) -> dict:
        levels = []
        parents = []
        for j in range(self.n_levels):
            sl = self.level_slice(j)
            levels.append(
                {
                    "level": j + self.level_min,
                    "delta": self.deltas[j] if j < len(self.deltas) else None,
                    "points": self.points[sl].tolist(),
                }
            )
            p = self.parent[sl]
            parents.append([int(v - self.offsets[j - 1]) if v >= 0 else -1 for v in p])
        return {
            "kind": self.kind,
            "dim": self.dim,
            "base": self.base,
            "level_min": self.level_min,
            "params": asdict(self.params) if self.params else None,
            "levels": levels,
            "parents": parents,
            "measures": self.measure.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NestedTree":
        pts = [np.array(lv["points"], dtype=float).reshape(len(lv["points"]), -1) for lv in obj["levels"]]
        sizes = [len(p) for p in pts]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        parent = np.concatenate(
            [
                np.array([v + offsets[j - 1] if v >= 0 else -1 for v in par], dtype=np.int64)
                for j, par in enumerate(obj["parents"])
            ]
        )
        params = TreeParams(**obj["params"]) if obj.get("params") else None
        deltas = tuple(lv.get("delta") for lv in obj["levels"])
        return cls(
            np.vstack(pts), offsets, parent, np.array(obj["measures"], dtype=float),
            int(obj["dim"]), float(obj["base"]), obj["kind"], int(obj["level_min"]), params, deltas,
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


# --------------------------------------------------------------------------
# spherical construction


def _nearest_parent(child_pts: np.ndarray, parent_pts: np.ndarray, delta_n: float) -> np.ndarray:
    """Nearest parent center, ties broken by smallest index, within delta_n."""
    k = min(8, len(parent_pts))
    kd = cKDTree(parent_pts)
    _, cand = kd.query(child_pts, k=k)
    cand = np.atleast_2d(cand.reshape(len(child_pts), k))
    dots = np.einsum("ij,ikj->ik", child_pts, parent_pts[cand])
    dist = np.arccos(np.clip(dots, -1.0, 1.0))
    best = dist.min(axis=1, keepdims=True)
    # smallest index among exact ties
    tied = np.where(dist == best, cand, np.iinfo(np.int64).max)
    choice = tied.min(axis=1)
    if np.any(best[:, 0] >= delta_n * (1 + DIST_RTOL)):
        bad = int(np.argmax(best[:, 0]))
        raise ValueError(
            f"orphan node: child {bad} is at distance {best[bad, 0]:.6g} >= {delta_n:.6g} "
            "from every coarser net point"
        )
    return choice


def build_partial_order(levels: list[LevelNet], params: TreeParams) -> NestedTree:
    """Parent links between consecutive levels.

    levels[0] must be the single root {e1} whose set is the whole sphere, so
    every level-1 node is its child.  For n >= 1, a node eta of level n+1
    within gamma b^{-n} / 2 of some xi in X_n gets that (unique) xi as parent;
    otherwise the nearest xi within gamma b^{-n}, with ties going to the
    smallest index.
    """
    if len(levels[0]) != 1:
        raise ValueError("level 0 must consist of the single root point")
    d = levels[0].d
    pts = [lv.points for lv in levels]
    sizes = [len(p) for p in pts]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    parent = np.full(offsets[-1], -1, dtype=np.int64)
    if len(levels) > 1:
        parent[offsets[1] : offsets[2]] = 0
    for n in range(1, len(levels) - 1):
        local = _nearest_parent(pts[n + 1], pts[n], params.delta(n))
        parent[offsets[n + 1] : offsets[n + 2]] = local + offsets[n]
    return NestedTree(
        np.vstack(pts), offsets, parent, np.full(offsets[-1], np.nan), d - 1, float(params.b),
        "sphere", 0, params, tuple(lv.delta for lv in levels),
    )


def compute_measures(tree: NestedTree, leaf_partition: CellPartition) -> NestedTree:
    """Leaf measures from the deepest-level cells; internal nodes sum their children."""
    last = tree.level_slice(tree.n_levels - 1)
    if leaf_partition.cell_area.size != last.stop - last.start:
        raise ValueError("leaf partition does not match the deepest level")
    leaf = np.zeros(tree.n_nodes)
    leaf[last] = leaf_partition.cell_area
    internal = tree.n_children[: last.start] == 0
    if np.any(internal):
        raise ValueError("a node above the deepest level has no children")
    return tree.with_measures(tree.subtree_sum(leaf))


def build_levels(d: int, params: TreeParams, seed: int = 0) -> list[LevelNet]:
    root = LevelNet(pi, e1(d)[None, :], 0)
    out = [root]
    for j in range(1, params.J + 1):
        delta = params.delta(j)
        if delta > pi:
            raise ValueError(f"delta_{j} = {delta:.4g} exceeds pi; lower gamma")
        out.append(build_maximal_net(d, delta, seed=seed + j, level=j))
    return out


@lru_cache(maxsize=16)
def build_sphere_tree(d: int, params: TreeParams, seed: int = 0) -> NestedTree:
    """Nets, partial order, and Voronoi-cell measures for levels 0..J.

    Results are cached per (d, params, seed); treat the returned tree as
    read-only.
    """
    _check_dim(d)
    levels = build_levels(d, params, seed)
    tree = build_partial_order(levels, params)
    if params.J == 0:
        return tree.with_measures(np.array([sphere_area(d)]))
    return compute_measures(tree, voronoi_partition(levels[-1]))


def q_membership(tree: NestedTree, xi: NodeId, x) -> np.ndarray | bool:
    """Is x in the truncated Q_xi?

    On the sphere Q_xi is the union of B(eta, betaw gamma b^{-level eta}) over
    descendants eta down to the deepest stored level (an inner approximation of
    the infinite union).  Dyadic trees test half-open cube membership.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    g = tree.index(xi)
    if tree.kind != "sphere":
        lev = xi.level
        h = 2.0 ** (-lev)
        lo = tree.points[g] - h / 2
        inside = np.all((x >= lo - 1e-15) & (x < lo + h - 1e-15), axis=1)
        return bool(inside[0]) if single else inside
    if tree.level[g] == 0:
        out = np.ones(len(x), dtype=bool)
        return bool(out[0]) if single else out
    p = tree.params
    desc = tree.descendants(g)
    radius = p.betaw * p.gamma * float(p.b) ** (-tree.level[desc].astype(float))
    out = np.zeros(len(x), dtype=bool)
    for lev in np.unique(tree.level[desc]):
        sel = desc[tree.level[desc] == lev]
        r = radius[tree.level[desc] == lev][0]
        dist = pairwise_distance(x, tree.points[sel])
        out |= np.any(dist < r, axis=1)
    return bool(out[0]) if single else out


def level_owners(tree: NestedTree, n: int, x: np.ndarray) -> list[set]:
    """For each sample, the set of level-n nodes whose truncated Q contains it."""
    p = tree.params
    anc = tree.ancestor_table()
    owners = [set() for _ in range(len(x))]
    for k in range(n, tree.n_levels):
        sl = tree.level_slice(k)
        r = p.betaw * p.gamma * float(p.b) ** (-k)
        kd = cKDTree(tree.points[sl])
        hits = kd.query_ball_point(x, float(chord_from_geodesic(r)))
        for i, hs in enumerate(hits):
            for h in hs:
                g = sl.start + h
                if pairwise_distance(x[i : i + 1], tree.points[g : g + 1])[0, 0] < r:
                    owners[i].add(int(anc[g, n]))
    return owners


# --------------------------------------------------------------------------
# Euclidean dyadic oracles


def dyadic_cube_oracle(d: int, J: int) -> NestedTree:
    """Dyadic subcubes of [0,1]^d, levels 0..J, with exact measures 2^{-nd}."""
    if d not in (1, 2):
        raise ValueError("dyadic oracle supports d in {1, 2}")
    pts, parents = [], []
    for n in range(J + 1):
        k = 2**n
        c = (np.arange(k) + 0.5) / k
        if d == 1:
            pts.append(c[:, None])
            par = np.arange(k) // 2
        else:
            ix, iy = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
            ix, iy = ix.ravel(), iy.ravel()
            pts.append(np.column_stack([c[ix], c[iy]]))
            par = (ix // 2) * (k // 2) + iy // 2
        parents.append(par if n > 0 else np.array([-1]))
    return _assemble(pts, parents, d, 0, "dyadic", lambda n: 2.0 ** (-n * d))


def dyadic_line_forest(coarse: int, J: int) -> NestedTree:
    """Two-sided dyadic intervals of [-2^coarse, 2^coarse), levels -coarse..J.

    The two level(-coarse) intervals [-2^coarse, 0) and [0, 2^coarse) are the
    roots of the two components of the real line.
    """
    pts, parents = [], []
    for n in range(-coarse, J + 1):
        h = 2.0 ** (-n)
        k = 2 * 2 ** (coarse + n)
        left = -(2.0**coarse) + h * np.arange(k)
        pts.append((left + h / 2)[:, None])
        parents.append(np.arange(k) // 2 if n > -coarse else np.full(k, -1))
    return _assemble(pts, parents, 1, -coarse, "dyadic", lambda n: 2.0 ** (-n))


def _assemble(pts, parents, dim, level_min, kind, measure_of) -> NestedTree:
    sizes = [len(p) for p in pts]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    parent = np.concatenate(
        [np.where(par >= 0, par + (offsets[j - 1] if j > 0 else 0), -1) for j, par in enumerate(parents)]
    ).astype(np.int64)
    measure = np.concatenate([np.full(s, measure_of(j + level_min)) for j, s in enumerate(sizes)])
    return NestedTree(np.vstack(pts), offsets, parent, measure, dim, 2.0, kind, level_min)


# --------------------------------------------------------------------------
# invariant checks


def children_bound(b: int, betaw: float, d: int) -> float:
    """(b / (betaw (b-1)))^{d-1} b^{d-1}, the cap-packing bound on children per node."""
    return (b / (betaw * (b - 1))) ** (d - 1) * float(b) ** (d - 1)


@dataclass
class TreeReport:
    parent_levels_ok: bool
    min_children: int
    max_children: int
    children_bound: float
    additivity_max_abs: float
    root_measure: float
    measure_band: list  # per level (min, max) of |Q| * b^{n(d-1)}
    kappa: float
    lam: float
    level_coverage_rel: float
    max_descendant_ratio: float  # max rho(xi, eta) / (b/(b-1) gamma b^{-n})

    def passes(self) -> bool:
        return (
            self.parent_levels_ok
            and self.min_children >= 2
            and self.max_children <= self.children_bound
            and self.additivity_max_abs == 0.0
            and self.level_coverage_rel < 1e-10
            and self.max_descendant_ratio <= 1.0
        )


def additivity_defect(tree: NestedTree) -> float:
    """max |measure(xi) - sum of children measures|, the sum taken in child order."""
    ptr, idx = tree._children_csr()
    worst = 0.0
    for g in np.nonzero(np.diff(ptr) > 0)[0]:
        s = 0.0
        for c in idx[ptr[g] : ptr[g + 1]]:
            s += tree.measure[c]
        worst = max(worst, abs(s - tree.measure[g]))
    return worst


def descendant_distance_ratio(tree: NestedTree) -> float:
    """max over nodes xi at levels >= 1 and descendants eta of rho(xi, eta) / (b/(b-1) gamma b^{-n})."""
    p = tree.params
    anc = tree.ancestor_table()
    worst = 0.0
    for n in range(1, tree.n_levels):
        rows = np.nonzero(tree.rel_level > n)[0]
        if rows.size == 0:
            continue
        a = anc[rows, n]
        dots = np.einsum("ij,ij->i", tree.points[rows], tree.points[a])
        rho = np.arccos(np.clip(dots, -1, 1))
        bound = p.b / (p.b - 1.0) * p.gamma * float(p.b) ** (-n)
        worst = max(worst, float(rho.max() / bound))
    return worst


def check_tree(tree: NestedTree) -> TreeReport:
    lev = tree.rel_level
    par = tree.parent
    nonroot = par >= 0
    parent_ok = bool(np.all(lev[par[nonroot]] == lev[nonroot] - 1))
    if tree.level_min == 0:
        parent_ok = parent_ok and len(tree.roots) == 1
    nch = tree.n_children
    internal = lev < tree.n_levels - 1
    mins = int(nch[internal].min()) if internal.any() else 0
    maxs = int(nch.max()) if internal.any() else 0
    band = []
    for j in range(tree.n_levels):
        m = tree.measure[tree.level_slice(j)] * tree.base ** ((j + tree.level_min) * tree.dim)
        band.append((float(m.min()), float(m.max())))
    kappa = max(hi / lo for lo, hi in band)
    ratio = tree.measure[nonroot] / tree.measure[par[nonroot]]
    lam = float(ratio.max()) if ratio.size else 0.0
    total = tree.measure[tree.roots].sum()
    cov = max(abs(tree.measure[tree.level_slice(j)].sum() - total) / total for j in range(tree.n_levels))
    if tree.kind == "sphere":
        bound = children_bound(tree.params.b, tree.params.betaw, tree.d)
        desc_ratio = descendant_distance_ratio(tree)
    else:
        bound = float(2**tree.dim)
        desc_ratio = 0.0
    return TreeReport(
        parent_ok, mins, maxs, bound, additivity_defect(tree), float(total), band,
        float(kappa), lam, float(cov), desc_ratio,
    )


def decay_sum(tree: NestedTree, x: np.ndarray, j: int, m: int, kappa: float) -> np.ndarray:
    """sum over eta in X_{j+m} of (1 + b^j rho(x, eta))^{-(d-1+kappa)} for each x."""
    x = np.atleast_2d(x)
    sl = tree.level_slice(j + m)
    rho = pairwise_distance(x, tree.points[sl])
    return np.sum((1.0 + tree.base**j * rho) ** (-(tree.dim + kappa)), axis=1)
