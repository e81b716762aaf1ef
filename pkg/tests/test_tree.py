import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphapprox.sphere_geom import pairwise_distance, sample_uniform, sphere_area
from sphapprox.tree import (
    NestedTree,
    NodeId,
    TreeParams,
    build_sphere_tree,
    check_tree,
    children_bound,
    dyadic_cube_oracle,
    dyadic_line_forest,
    decay_sum,
    level_owners,
    q_membership,
)


def test_params_default_condition():
    p = TreeParams()
    assert p.b == 4 and p.betaw == pytest.approx(1 / 12)
    assert 1 / (p.b - 1) + 2 * p.betaw <= 0.5


def test_params_reject_betaw():
    with pytest.raises(ValueError, match="1/\\(b-1\\) \\+ 2\\*betaw"):
        TreeParams(b=4, betaw=0.3)
    with pytest.raises(ValueError):
        TreeParams(b=3)


def test_level_one_attaches_to_root(small_sphere_tree):
    t = small_sphere_tree
    sl = t.level_slice(1)
    assert np.all(t.parent[sl] == 0)
    assert t.parent[0] == -1


def test_circle_half_spacing_parent(circle_trees):
    t = circle_trees[4]
    p = t.params
    for n in range(1, t.n_levels - 1):
        child = t.points[t.level_slice(n + 1)]
        par = t.points[t.level_slice(n)]
        D = pairwise_distance(child, par)
        # children exactly at half-spacing are float ties and fall to the nearest-point rule
        near = D < p.delta(n) / 2 * (1 - 1e-9)
        rows = np.nonzero(near.any(axis=1))[0]
        expected = np.argmax(near[rows], axis=1) + t.offsets[n]
        np.testing.assert_array_equal(t.parent[t.offsets[n + 1] + rows], expected)
        # uniqueness of the half-spacing parent
        assert near.sum(axis=1).max() <= 1


def test_parent_is_nearest_within_delta(small_sphere_tree):
    t = small_sphere_tree
    for n in range(1, t.n_levels - 1):
        sl = t.level_slice(n + 1)
        D = pairwise_distance(t.points[sl], t.points[t.level_slice(n)])
        chosen = D[np.arange(D.shape[0]), t.parent[sl] - t.offsets[n]]
        np.testing.assert_allclose(chosen, D.min(axis=1), rtol=0, atol=1e-15)
        assert np.all(chosen < t.params.delta(n))


def test_descendant_distance_bound(small_sphere_tree):
    t = small_sphere_tree
    p = t.params
    for g in range(1, t.n_nodes):
        n = int(t.level[g])
        desc = t.descendants(g)
        rho = pairwise_distance(t.points[g : g + 1], t.points[desc])
        assert rho.max() <= p.b / (p.b - 1) * p.gamma * p.b ** (-n)


def test_q_membership(small_sphere_tree):
    t = small_sphere_tree
    p = t.params
    xi = NodeId(2, 5)
    g = t.index(xi)
    c = t.points[g]
    assert q_membership(t, xi, c)
    x = sample_uniform(3, 5000, seed=2)
    rho = pairwise_distance(x, c[None, :])[:, 0]
    inside = q_membership(t, xi, x)
    outer = p.b / (p.b - 1) * p.gamma * p.b**-2
    inner = p.betaw * p.gamma * p.b**-2
    assert not np.any(inside[rho >= outer])
    assert np.all(inside[rho < inner])
    assert q_membership(t, NodeId(0, 0), x).all()


def test_same_level_sets_disjoint(small_sphere_tree):
    x = sample_uniform(3, 3000, seed=1)
    for n in (1, 2):
        owners = level_owners(small_sphere_tree, n, x)
        assert max(len(o) for o in owners) <= 1


def test_measures(small_sphere_tree):
    t = small_sphere_tree
    assert t.measure[0] == pytest.approx(4 * math.pi, rel=1e-6)
    for g in range(t.n_nodes):
        ch = t.children(g)
        if ch.size:
            # bit-exact: parent measure is the sum of its children
            assert t.measure[g] == sum(t.measure[c] for c in ch)


def test_children_counts(small_sphere_tree, circle_trees):
    for t in (small_sphere_tree, *circle_trees.values()):
        rep = check_tree(t)
        assert rep.min_children >= 2
        assert rep.max_children <= children_bound(t.params.b, t.params.betaw, t.d)
        assert rep.passes()


def test_children_bound_value():
    assert children_bound(4, 1 / 12, 3) == pytest.approx((4 / (3 / 12)) ** 2 * 16)
    assert children_bound(4, 1 / 12, 2) == pytest.approx(64.0)


def test_measure_band_circle(circle_trees):
    # |Q| b^{n} for the circle tree stays in a band of ratio < 2 at every level
    for t in circle_trees.values():
        rep = check_tree(t)
        assert rep.kappa < 2.0


def test_decay_sum_bounded(small_sphere_tree, circle_trees):
    # sum_{eta in X_{j+m}} (1 + b^j rho)^{-(d-1+kappa)} <= c b^{m(d-1)}, c frozen at 2
    for t in (small_sphere_tree, circle_trees[5]):
        x = sample_uniform(t.d, 200, seed=0)
        for j in range(t.n_levels):
            for m in range(t.n_levels - j):
                v = decay_sum(t, x, j, m, 1.0)
                assert v.max() <= 2.0 * t.base ** (m * t.dim)


def test_dyadic_oracle_small():
    t = dyadic_cube_oracle(1, 2)
    np.testing.assert_array_equal(t.level_sizes(), [1, 2, 4])
    np.testing.assert_array_equal(t.n_children[:3], [2, 2, 2])
    np.testing.assert_array_equal(t.measure, [1, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25])


@pytest.mark.parametrize("d,J", [(1, 6), (2, 4)])
def test_dyadic_oracle_structure(d, J):
    t = dyadic_cube_oracle(d, J)
    np.testing.assert_array_equal(t.measure, 2.0 ** (-t.level * d))
    rep = check_tree(t)
    assert rep.passes()
    assert rep.kappa == 1.0
    assert rep.lam == 2.0**-d
    # each point lies in exactly one cube per level
    x = np.random.default_rng(0).uniform(size=(200, d))
    for n in range(J + 1):
        sl = t.level_slice(n)
        hits = np.array([q_membership(t, t.node_id(g), x) for g in range(sl.start, sl.stop)])
        np.testing.assert_array_equal(hits.sum(axis=0), 1)


def test_line_forest():
    t = dyadic_line_forest(2, 3)
    assert len(t.roots) == 2
    assert t.level_min == -2
    np.testing.assert_allclose(t.measure[t.roots], [4.0, 4.0])
    assert check_tree(t).passes()


def test_tree_json_roundtrip(circle_trees):
    t = circle_trees[3]
    back = NestedTree.from_json(json.loads(t.dumps()))
    np.testing.assert_array_equal(back.parent, t.parent)
    np.testing.assert_array_equal(back.measure, t.measure)
    assert back.dumps() == t.dumps()


def test_tree_build_deterministic():
    p = TreeParams(b=4, gamma=math.pi / 2, J=3)
    a = build_sphere_tree.__wrapped__(2, p)
    b = build_sphere_tree.__wrapped__(2, p)
    assert a.dumps() == b.dumps()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 5456))
def test_ancestor_chain(g):
    t = build_sphere_tree(2, TreeParams(b=4, gamma=math.pi / 2, J=5))
    assert t.n_nodes == 5457
    chain = t.ancestors(g)
    assert len(chain) == t.level[g]
    assert all(g in t.descendants(a) for a in chain)
    assert np.all(np.diff(t.measure[[g, *chain]]) >= 0)


def test_root_measure_circle(circle_trees):
    for t in circle_trees.values():
        assert t.measure[0] == pytest.approx(sphere_area(2), rel=1e-12)
