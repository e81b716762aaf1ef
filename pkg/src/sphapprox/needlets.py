"""Needlet frame psi_xi(x) = w_xi^{1/2} Psi_j(xi . x) on a nested tree, with analysis
and synthesis operators."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .cubature import CubatureRule, product_gauss_rule, root_rule, solve_weights
from .harmonics import (
    CutoffPair,
    SphericalPolynomial,
    ZonalKernel,
    basis_degrees,
    basis_matrix,
    build_cutoffs,
    eval_lambda_kernel,
    needlet_kernel,
)
from .nets import LevelNet
from .harmonics import poly_space_dim as _dim
from .tree import NestedTree, NodeId, TreeParams, build_sphere_tree

# rows of basis values formed at once when sweeping a level
_CHUNK = 2048


@dataclass
class CoeffSeq:
    """Real values h_xi indexed by the nodes of a tree (zero by default)."""

    tree: NestedTree
    values: np.ndarray = None

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros(self.tree.n_nodes)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.tree.n_nodes,):
            raise ValueError("one value per tree node is required")

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.values)[0]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.values))

    def __getitem__(self, node: NodeId) -> float:
        return float(self.values[self.tree.index(node)])

    def __setitem__(self, node: NodeId, value: float) -> None:
        self.values[self.tree.index(node)] = value

    def copy(self) -> "CoeffSeq":
        return CoeffSeq(self.tree, self.values.copy())

    def without(self, nodes) -> "CoeffSeq":
        """Copy with the given global indices set to zero."""
        out = self.values.copy()
        out[np.asarray(list(nodes), dtype=np.int64)] = 0.0
        return CoeffSeq(self.tree, out)

    def scaled(self, c: float) -> "CoeffSeq":
        return CoeffSeq(self.tree, c * self.values)

    def to_jsonl(self) -> str:
        lines = []
        for g in self.support:
            nid = self.tree.node_id(int(g))
            lines.append(json.dumps({"level": nid.level, "index": nid.index, "value": float(self.values[g])}))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(cls, tree: NestedTree, text: str) -> "CoeffSeq":
        h = cls(tree)
        for line in text.splitlines():
            if line.strip():
                rec = json.loads(line)
                h[NodeId(rec["level"], rec["index"])] = rec["value"]
        return h


@dataclass
class NeedletSystem:
    tree: NestedTree
    rules: list[CubatureRule]
    kernels: list[ZonalKernel]
    cutoffs: CutoffPair
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.weights = np.concatenate([r.weights for r in self.rules])
        if self.weights.size != self.tree.n_nodes:
            raise ValueError("cubature rules must cover every tree level")

    @property
    def J(self) -> int:
        return self.tree.n_levels - 1

    @property
    def d(self) -> int:
        return self.tree.d

    @property
    def b(self) -> float:
        return self.cutoffs.b

    def max_degree(self) -> int:
        """Highest spherical-harmonic degree carried by any needlet."""
        return max(k.degree for k in self.kernels)

    def reproduced_degree(self) -> int:
        """Band limit below which analysis followed by synthesis is the identity."""
        return int(round(self.b ** (self.J - 1)))

    def level_multipliers(self, j: int, L: int) -> np.ndarray:
        """a_hat(k / b^{j-1}) on the basis ordering up to degree L (1 at k = 0 for j = 0)."""
        k = basis_degrees(L, self.d).astype(float)
        if j == 0:
            return (k == 0).astype(float)
        return self.cutoffs.ahat(k / self.b ** (j - 1))


def build_needlet_system(d: int, J: int, b: int = 4, gamma_bar: float = 1.0, betaw: float = 1.0 / 12.0, seed: int = 0) -> NeedletSystem:
    """Tree with delta_j = gamma_bar b^{-j} / 2 and, on each level j >= 1, a positive
    rule exact to degree 2 b^j on the level's net."""
    return _build_needlet_system(d, J, b, gamma_bar, betaw, seed)


@lru_cache(maxsize=8)
def _build_needlet_system(d, J, b, gamma_bar, betaw, seed) -> NeedletSystem:
    params = TreeParams(b=b, betaw=betaw, gamma=gamma_bar / 2.0, J=J)
    tree = build_sphere_tree(d, params, seed)
    rules = [root_rule(d)]
    for j in range(1, J + 1):
        net = LevelNet(params.delta(j), tree.points[tree.level_slice(j)], j)
        rules.append(solve_weights(net, 2 * b**j, level=j))
    cut = build_cutoffs(b)
    kernels = [needlet_kernel(j, cut, d) for j in range(J + 1)]
    return NeedletSystem(tree, rules, kernels, cut)


def eval_psi(sys: NeedletSystem, xi: NodeId, x) -> np.ndarray | float:
    g = sys.tree.index(xi)
    u = np.asarray(x, dtype=float) @ sys.tree.points[g]
    out = np.sqrt(sys.weights[g]) * eval_lambda_kernel(sys.kernels[xi.level], u)
    return out


def harmonic_coefficients(f, d: int, L: int, quad_degree: int | None = None) -> np.ndarray:
    """Coefficients <f, Y_{k nu}> for k <= L via a product Gauss rule of the given degree
    (exact when f is a polynomial of degree <= quad_degree - L)."""
    if isinstance(f, SphericalPolynomial):
        out = np.zeros(basis_degrees(L, d).size)
        n = min(out.size, f.coeffs.size)
        out[:n] = f.coeffs[:n]
        return out
    quad_degree = 2 * L if quad_degree is None else quad_degree
    rule = product_gauss_rule(d, quad_degree)
    vals = np.asarray(f(rule.points), dtype=float)
    return basis_matrix(L, rule.points, d).T @ (rule.weights * vals)


def analyze(sys: NeedletSystem, f, quad_degree: int | None = None) -> CoeffSeq:
    """<f, psi_xi> for every node.

    f is projected on harmonics up to the largest needlet degree (exactly for
    SphericalPolynomial input, otherwise by a product Gauss rule of degree
    quad_degree, default twice the needlet degree), after which
    <f, psi_xi> = w_xi^{1/2} sum_k a_hat(k/b^{j-1}) (proj_k f)(xi).
    """
    L = sys.max_degree()
    c = harmonic_coefficients(f, sys.d, L, quad_degree)
    out = np.zeros(sys.tree.n_nodes)
    for j in range(sys.J + 1):
        sl = sys.tree.level_slice(j)
        Lj = sys.kernels[j].degree
        v = sys.level_multipliers(j, Lj) * c[: _dim(Lj, sys.d)]
        pts = sys.tree.points[sl]
        for s in range(0, len(pts), _CHUNK):
            B = basis_matrix(Lj, pts[s : s + _CHUNK], sys.d)
            out[sl.start + s : sl.start + s + len(B)] = B @ v
        out[sl] *= np.sqrt(sys.weights[sl])
    return CoeffSeq(sys.tree, out)


def analyze_by_quadrature(sys: NeedletSystem, f, quad_degree: int) -> CoeffSeq:
    """<f, psi_xi> = sum_i v_i f(y_i) psi_xi(y_i) over a product rule {(y_i, v_i)}.

    Independent of the harmonic projection used by analyze; exact whenever
    quad_degree >= deg f + deg psi_xi.
    """
    rule = product_gauss_rule(sys.d, quad_degree)
    fv = rule.weights * np.asarray(f(rule.points), dtype=float)
    out = np.zeros(sys.tree.n_nodes)
    for j in range(sys.J + 1):
        sl = sys.tree.level_slice(j)
        G = eval_lambda_kernel(sys.kernels[j], sys.tree.points[sl] @ rule.points.T)
        out[sl] = np.sqrt(sys.weights[sl]) * (np.atleast_2d(G) @ fv)
    return CoeffSeq(sys.tree, out)


def synthesis_polynomial(sys: NeedletSystem, h: CoeffSeq) -> SphericalPolynomial:
    """The spherical polynomial sum_xi h_xi psi_xi, through its harmonic coefficients
    sum_xi h_xi w_xi^{1/2} a_hat(k/b^{j-1}) Y_{k nu}(xi)."""
    L = sys.max_degree()
    c = np.zeros(_dim(L, sys.d))
    for j in range(sys.J + 1):
        sl = sys.tree.level_slice(j)
        hv = h.values[sl] * np.sqrt(sys.weights[sl])
        nz = np.nonzero(hv)[0]
        if nz.size == 0:
            continue
        Lj = sys.kernels[j].degree
        pts = sys.tree.points[sl][nz]
        acc = np.zeros(_dim(Lj, sys.d))
        for s in range(0, len(pts), _CHUNK):
            acc += basis_matrix(Lj, pts[s : s + _CHUNK], sys.d).T @ hv[nz][s : s + _CHUNK]
        c[: acc.size] += sys.level_multipliers(j, Lj) * acc
    return SphericalPolynomial(sys.d, L, c)


def synthesize(sys: NeedletSystem, h: CoeffSeq, x) -> np.ndarray | float:
    """sum_xi h_xi psi_xi(x), evaluated through synthesis_polynomial."""
    return synthesis_polynomial(sys, h)(x)


def synthesize_direct(sys: NeedletSystem, h: CoeffSeq, x) -> np.ndarray | float:
    """sum_xi h_xi psi_xi(x) as an explicit kernel sum, level by level in node order."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    out = np.zeros(len(x))
    for j in range(sys.J + 1):
        sl = sys.tree.level_slice(j)
        hv = h.values[sl]
        nz = np.nonzero(hv)[0]
        if nz.size == 0:
            continue
        pts = sys.tree.points[sl][nz]
        G = np.atleast_2d(eval_lambda_kernel(sys.kernels[j], x @ pts.T))
        out += G @ (np.sqrt(sys.weights[sl][nz]) * hv[nz])
    return float(out[0]) if single else out


def reconstruction_error(sys: NeedletSystem, f: SphericalPolynomial) -> tuple[float, float]:
    """(relative L2 error of synthesize(analyze(f)), Parseval ratio sum <f,psi>^2 / ||f||^2).

    The L2 norm of the difference is computed with a product rule exact for
    its square.
    """
    h = analyze(sys, f)
    deg = max(sys.max_degree(), f.L)
    rule = product_gauss_rule(sys.d, 2 * deg)
    diff = synthesize(sys, h, rule.points) - f(rule.points)
    err = np.sqrt(np.dot(rule.weights, diff**2))
    nf = f.l2_norm()
    return float(err / nf), float(np.sum(h.values**2) / nf**2)
