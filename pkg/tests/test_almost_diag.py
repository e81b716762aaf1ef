import math

import numpy as np
import pytest

from sphapprox.almost_diag import (
    OmegaParams,
    apply_omega,
    apply_omega_many,
    boundedness_ratios,
    boundedness_thresholds,
    node_distance,
    omega_entry,
    random_f_sequences,
    row_sums,
)
from sphapprox.needlets import CoeffSeq
from sphapprox.seqnorms import tail_profile
from sphapprox.tree import NodeId, dyadic_cube_oracle

P = OmegaParams(K=2, M=4, s=0, q=2)


def test_entry_examples(circle_trees):
    t = circle_trees[3]
    xi, eta = NodeId(2, 3), NodeId(3, 10)
    assert omega_entry(P, t, xi, xi) == 1.0
    assert omega_entry(OmegaParams(K=math.inf), t, xi, eta) == 0.0
    assert omega_entry(P, t, xi, eta) == pytest.approx(omega_entry(P, t, eta, xi), rel=1e-15)
    # hand value: N = 16 and 64, rho from the node centers
    rho = node_distance(t, np.array([t.index(xi)]), np.array([t.index(eta)]))[0, 0]
    assert omega_entry(P, t, xi, eta) == pytest.approx((16 / 64) ** 2.5 * (1 + 16 * rho) ** -4, rel=1e-13)


def test_infinite_k_same_level(circle_trees):
    t = circle_trees[3]
    a, b = NodeId(2, 0), NodeId(2, 5)
    rho = node_distance(t, np.array([t.index(a)]), np.array([t.index(b)]))[0, 0]
    assert omega_entry(OmegaParams(K=math.inf, M=3), t, a, b) == pytest.approx((1 + 16 * rho) ** -3)


def test_thresholds():
    assert boundedness_thresholds(0.5, math.inf, 2) == (0.5, 2.0)
    k, m = boundedness_thresholds(0.0, 2.0, 1)
    assert k == pytest.approx(0.5) and m == 1.0
    k, m = boundedness_thresholds(0.0, 0.5, 2)
    assert m == 4.0 and k == pytest.approx(max(0.5, -(0.25 + 0.25 - 1) * 2, 0.5) / 0.5)
    # the default parameters sit above the thresholds on the circle
    k, m = boundedness_thresholds(P.s, P.q, 1)
    assert P.K > k and P.M > m


def test_zero_sequence(circle_trees):
    t = circle_trees[3]
    assert np.all(apply_omega(P, CoeffSeq(t)).values == 0)


def test_dense_matches_entrywise():
    t = dyadic_cube_oracle(1, 3)
    rng = np.random.default_rng(0)
    h = rng.standard_normal(t.n_nodes)
    M = np.array([[omega_entry(P, t, t.node_id(i), t.node_id(j)) for j in range(t.n_nodes)] for i in range(t.n_nodes)])
    np.testing.assert_allclose(apply_omega_many(P, t, h), M @ np.abs(h), rtol=1e-13)
    np.testing.assert_allclose(row_sums(P, t), M.sum(axis=1), rtol=1e-13)


def test_budget_guard(circle_trees):
    with pytest.raises(ValueError, match="budget"):
        row_sums(P, circle_trees[5], node_budget=100)


def test_row_sums_bounded(circle_trees):
    # sup_xi sum_eta omega <= c; c frozen at 1.2 (measured 1.154, 1.157, 1.158 for J = 3, 4, 5)
    sups = [row_sums(P, circle_trees[J]).max() for J in (3, 4, 5)]
    assert max(sups) <= 1.2
    assert min(sups) >= 1.0
    assert np.all(np.diff(sups) < 0.01)


def test_boundedness_ratio_stable(circle_trees):
    r = {J: boundedness_ratios(P, circle_trees[J], random_f_sequences(circle_trees[J], 50, P.s, seed=J)).max() for J in (3, 5)}
    # frozen: ratios measured near 1.07 and 1.06
    assert max(r.values()) <= 1.2
    assert abs(r[5] / r[3] - 1) <= 0.25


def test_omega_dominates_identity(circle_trees):
    # diagonal entries are 1, so |h| <= Omega |h| entrywise
    t = circle_trees[4]
    H = random_f_sequences(t, 5, 0.0, seed=1)
    assert np.all(apply_omega_many(P, t, H) >= np.abs(H) * (1 - 1e-14))


def test_finite_support_stays_separable(circle_trees):
    t = circle_trees[5]
    h = CoeffSeq(t)
    h.values[t.level <= 1] = 1.0
    prof = np.array([v for _, v in tail_profile(apply_omega(P, h), 0.0, P.q)])
    assert np.all(np.diff(prof[2:]) < 0)
    assert prof[-1] < 0.01 * prof[1]


def test_random_f_sequences_brackets_order_one(circle_trees):
    t = circle_trees[4]
    H = random_f_sequences(t, 3, 0.5, seed=2)
    assert H.shape == (t.n_nodes, 3)
    prof = np.array([v for _, v in tail_profile(CoeffSeq(t, H[:, 0]), 0.5, 2.0)])
    assert prof.min() > 0.1 and prof.max() < 10
