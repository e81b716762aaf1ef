import json
import math

import numpy as np
import pytest

from sphapprox.cubature import (
    CubatureError,
    CubatureRule,
    moment_residual,
    product_gauss_rule,
    root_rule,
    solve_weights,
    weight_band,
)
from sphapprox.harmonics import basis_matrix, poly_space_dim, zonal_projector
from sphapprox.nets import LevelNet, build_maximal_net, voronoi_partition
from sphapprox.sphere_geom import sample_uniform, sphere_area


def test_degree_zero_keeps_cell_areas():
    net = build_maximal_net(3, 0.5)
    rule = solve_weights(net, 0)
    np.testing.assert_array_equal(rule.weights, voronoi_partition(net).cell_area)
    assert rule.weights.sum() == pytest.approx(4 * math.pi, rel=1e-12)


@pytest.mark.parametrize("n", [5, 12, 33])
def test_circle_trapezoid(n):
    net = build_maximal_net(2, 2 * math.pi / n)
    L = (n - 1) // 2
    rule = solve_weights(net, L)
    np.testing.assert_allclose(rule.weights, 2 * math.pi / n, rtol=1e-13)
    # equal weights stay exact up to degree n - 1
    eq = CubatureRule(net.points, np.full(n, 2 * math.pi / n), n - 1)
    assert moment_residual(eq) <= 1e-12


def test_needlet_rules_exact_and_positive(sys3, sys2_deep):
    for sys in (sys3, sys2_deep):
        b = int(sys.b)
        for j, rule in enumerate(sys.rules):
            if j:
                assert rule.exact_degree == 2 * b**j
            assert moment_residual(rule) <= 1e-10
            assert np.all(rule.weights > 0)
            assert rule.weights.sum() == pytest.approx(sphere_area(sys.d), abs=1e-10)


def test_weight_band_frozen(sys3, sys2_deep):
    # w / delta^{d-1} stays within frozen two-sided bounds
    for sys, lo, hi in ((sys3, 0.5, 4.0), (sys2_deep, 0.9, 1.1)):
        p = sys.tree.params
        for j, rule in enumerate(sys.rules[1:], 1):
            a, b = weight_band(rule, p.delta(j))
            assert lo <= a <= b <= hi


def test_integrate_examples(sys3):
    rule = sys3.rules[2]
    assert rule.integrate(lambda x: np.ones(len(x))) == pytest.approx(4 * math.pi, abs=1e-10)
    L = rule.exact_degree
    B = basis_matrix(L, rule.points, 3)
    np.testing.assert_allclose(B[:, 1:].T @ rule.weights, 0.0, atol=1e-10)
    # int Z_k(x . y) Z_k(y . z) dy = Z_k(x . z) when 2k <= degree
    x, z = sample_uniform(3, 2, seed=3)
    for k in (1, 5, L // 2):
        val = rule.integrate(lambda y: zonal_projector(k, 3, y @ x) * zonal_projector(k, 3, y @ z))
        assert val == pytest.approx(zonal_projector(k, 3, x @ z), abs=1e-9)


def test_agrees_with_product_rule(sys3):
    # two unrelated exact rules give the same integral for a degree-20 polynomial
    rng = np.random.default_rng(0)
    c = rng.standard_normal(poly_space_dim(16, 3))
    f = lambda y: basis_matrix(16, y, 3) @ c  # noqa: E731
    ref = product_gauss_rule(3, 40).integrate(f)
    assert sys3.rules[2].integrate(f) == pytest.approx(ref, abs=1e-10)
    assert ref == pytest.approx(c[0] * math.sqrt(4 * math.pi), abs=1e-10)


@pytest.mark.parametrize("d,deg", [(2, 10), (3, 9), (3, 30)])
def test_product_rule_exact(d, deg):
    rule = product_gauss_rule(d, deg)
    assert moment_residual(rule) <= 1e-12
    assert np.all(rule.weights > 0)


def test_too_few_points_raises():
    net = build_maximal_net(3, 1.0)
    with pytest.raises(CubatureError, match="denser net"):
        solve_weights(net, 10)


def test_nonpositive_weights_raise():
    # a clustered point set cannot carry positive weights at high degree
    pts = np.vstack([sample_uniform(3, 60, seed=0), np.array([[1.0, 0, 0]]) + 1e-3 * np.eye(3)[[1]]])
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    with pytest.raises(CubatureError):
        solve_weights(pts, 6, w0=np.full(len(pts), 4 * math.pi / len(pts)))


def test_root_rule():
    r = root_rule(3)
    assert moment_residual(r) == 0.0
    assert r.weights[0] == pytest.approx(4 * math.pi)


def test_rule_json_roundtrip(sys3):
    rule = sys3.rules[1]
    back = CubatureRule.from_json(json.loads(json.dumps(rule.to_json())))
    np.testing.assert_array_equal(back.weights, rule.weights)
    assert back.exact_degree == rule.exact_degree and back.level == 1


def test_solver_reports_diagnostics(sys3):
    diag = sys3.rules[2].diagnostics
    assert diag["residual"] <= 1e-10
    assert diag["condition_estimate"] < 10
    assert diag["n_points"] >= diag["n_moments"]


def test_level_net_input_equivalent():
    net = build_maximal_net(3, 0.5)
    a = solve_weights(net, 3)
    b = solve_weights(net.points, 3, w0=voronoi_partition(LevelNet(0.5, net.points)).cell_area)
    np.testing.assert_allclose(a.weights, b.weights, rtol=1e-14)
