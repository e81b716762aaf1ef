import json
import math

import numpy as np
import pytest

from sphapprox.harmonics import BasisIndex, SphericalPolynomial, sph_basis_eval
from sphapprox.newton import (
    NewtonianAtom,
    atoms_demo,
    boundary_coefficients,
    eval_atom,
    fd_laplacian,
    fit_atom,
    harmonic_extension,
    newton_kernel,
    poisson_extension,
    sphere_mean,
    sphere_mean_mc,
)
from sphapprox.sphere_geom import normalize, sample_uniform


def _atom3():
    poles = np.array([[2.0, 0, 0], [0, -1.5, 0.5], [0.3, 0.2, -1.4]])
    return NewtonianAtom(poles, np.array([0.5, 1.0, -2.0, 0.7]), 3)


def _atom2():
    poles = np.array([[1.5, 0.5], [-0.2, -1.3]])
    return NewtonianAtom(poles, np.array([0.1, 1.0, -0.4]), 2)


def _interior(d, n, rmax, seed):
    rng = np.random.default_rng(seed)
    u = normalize(rng.standard_normal((n, d)))
    return u * rmax * rng.uniform(0, 1, (n, 1)) ** (1 / d)


def test_kernel():
    assert newton_kernel(3, 2.0) == 0.5
    assert newton_kernel(2, math.e) == pytest.approx(-1.0)
    assert newton_kernel(4, 2.0) == 0.25


def test_atom_examples():
    a = NewtonianAtom(np.array([[2.0, 0, 0]]), np.array([0.3, 1.7]), 3)
    assert eval_atom(a, np.zeros(3)) == pytest.approx(0.3 + 1.7 / 2)
    # d = 2, a_0 = 0, a pole at distance e from x
    b = NewtonianAtom(np.array([[math.e, 0.0]]), np.array([0.0, 1.3]), 2)
    assert eval_atom(b, np.zeros(2)) == pytest.approx(-1.3)
    # no poles: the constant
    c = NewtonianAtom(np.zeros((0, 3)), np.array([4.0]), 3)
    np.testing.assert_allclose(eval_atom(c, np.zeros((2, 3))), 4.0)


def test_atom_rejects_bad_input():
    with pytest.raises(ValueError, match="outside"):
        NewtonianAtom(np.array([[0.5, 0, 0]]), np.array([0.0, 1.0]), 3)
    with pytest.raises(ValueError, match="outside"):
        NewtonianAtom(np.array([[1.0, 0]]), np.array([0.0, 1.0]), 2)
    with pytest.raises(ValueError, match="coefficient"):
        NewtonianAtom(np.array([[2.0, 0, 0]]), np.array([1.0]), 3)
    with pytest.raises(ValueError, match="ball"):
        eval_atom(_atom3(), np.array([1.5, 0, 0]))


def test_atom_json_roundtrip():
    a = _atom3()
    obj = a.to_json()
    assert set(obj) == {"d", "a0", "poles", "coeffs"}
    b = NewtonianAtom.from_json(json.dumps(obj))
    np.testing.assert_array_equal(b.poles, a.poles)
    np.testing.assert_array_equal(b.coeffs, a.coeffs)


@pytest.mark.parametrize("atom", [_atom3(), _atom2()], ids=["d3", "d2"])
def test_fd_harmonicity(atom):
    f = lambda x: eval_atom(atom, x)  # noqa: E731
    for x in _interior(atom.d, 5, 0.6, seed=1):
        e1 = abs(fd_laplacian(f, x, 0.02))
        e2 = abs(fd_laplacian(f, x, 0.01))
        assert e1 < 1e-2
        # O(h^2): halving h divides the residual by about 4
        assert 3.0 < e1 / e2 < 5.0


def test_fd_laplacian_detects_non_harmonic():
    f = lambda x: np.sum(x**2, axis=1)  # noqa: E731
    assert fd_laplacian(f, np.array([0.1, 0.2, 0.3]), 0.01) == pytest.approx(6.0, rel=1e-8)


@pytest.mark.parametrize("atom", [_atom3(), _atom2()], ids=["d3", "d2"])
def test_mean_value_property(atom):
    f = lambda x: eval_atom(atom, x)  # noqa: E731
    for c in _interior(atom.d, 10, 0.5, seed=2):
        assert sphere_mean(f, c, 0.3, degree=24) == pytest.approx(f(c), abs=1e-10)
        m, se = sphere_mean_mc(f, c, 0.3, n=20000, seed=3)
        assert abs(m - f(c)) < 5 * se + 1e-12


def test_extension_examples():
    for d in (2, 3):
        c = np.zeros(9 if d == 3 else 5)
        c[0] = 2.0 * math.sqrt(2 * math.pi if d == 2 else 4 * math.pi)
        x = _interior(d, 6, 0.9, seed=4)
        np.testing.assert_allclose(harmonic_extension(c, x, d), 2.0, rtol=1e-13)
    # Y_1 at |x| = 1/2 is half its boundary value in the same direction
    c = np.zeros(4)
    c[2] = 1.0
    u = sample_uniform(3, 5, seed=5)
    np.testing.assert_allclose(harmonic_extension(c, 0.5 * u, 3), 0.5 * sph_basis_eval(BasisIndex(1, 2), u), atol=1e-14)
    assert harmonic_extension(c, np.zeros(3), 3) == 0.0


def test_extension_domain():
    with pytest.raises(ValueError):
        harmonic_extension(np.zeros(4), np.array([1.0, 0, 0]), 3)
    with pytest.raises(ValueError):
        harmonic_extension(np.zeros(5), np.zeros(3), 3)


@pytest.mark.parametrize("d", [2, 3])
def test_series_vs_poisson_quadrature(d):
    f = SphericalPolynomial.random(d, 6, seed=6)
    x = _interior(d, 20, 0.7, seed=7)
    np.testing.assert_allclose(poisson_extension(f, x, d, degree=160), harmonic_extension(f.coeffs, x, d), atol=1e-8)


@pytest.mark.parametrize("atom", [_atom3(), _atom2()], ids=["d3", "d2"])
def test_extension_of_boundary_trace(atom):
    # truncation at degree L costs about (|x| / min |y|)^L
    c = boundary_coefficients(atom, 40)
    x = _interior(atom.d, 10, 0.5, seed=8)
    np.testing.assert_allclose(harmonic_extension(c, x, atom.d), eval_atom(atom, x), atol=1e-8)


def test_fit_atom_recovers_coefficients():
    a = _atom3()
    b = fit_atom(lambda y: eval_atom(a, y), 3, a.poles, 24)
    np.testing.assert_allclose(b.coeffs, a.coeffs, atol=1e-10)


def test_atoms_demo(sys2):
    f = SphericalPolynomial.random(2, 8, seed=9)
    r = atoms_demo(sys2, f, 6, 4, seed=1)
    assert r.selected.size <= 6
    assert r.atom.n_poles == 4 * r.selected.size
    assert r.boundary_error < 0.1 and r.interior_error < 0.1
    assert set(r.to_json()) >= {"n", "n_tilde", "n_atoms", "sequence_error_gq"}
    again = atoms_demo(sys2, f, 6, 4, seed=1)
    np.testing.assert_array_equal(again.atom.coeffs, r.atom.coeffs)


def test_atoms_demo_zero(sys2):
    r = atoms_demo(sys2, lambda x: np.zeros(len(x)), 4, 2)
    assert r.sequence_error == 0.0 and r.boundary_error == 0.0 and r.interior_error == 0.0
