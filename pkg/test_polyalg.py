#!/usr/bin/env python3
"""
Legendre, quadrature and polynomial-algebra tests

Usage:
    uv run pytest test_polyalg.py
"""

import numpy as np
import pytest

from closure_modules.closure import weights_to_matrix
from closure_modules.errors import DegenerateInputError, RangeError, StructureError
from closure_modules.polyalg import (
    associated_poly_seq,
    basis_matrix,
    gauss_legendre,
    hessenberg_rho,
    legendre_eval,
    legendre_series_eval,
    legendre_table,
    legendre_to_poly,
    monomial_to_legendre_row,
    poly_eval,
    poly_roots,
    poly_to_legendre,
    vieta_coeffs,
)


def separated_roots(rng, n: int) -> np.ndarray:
    """n sorted roots in [-1, 1] at least 0.1 apart"""
    base = np.linspace(-0.9, 0.9, n)
    return np.sort(base + rng.uniform(-0.02, 0.02, n))


def jacobi_matrix(rng, n: int) -> np.ndarray:
    """Tridiagonal with positive off-diagonal products (symmetrizable)"""
    H = np.diag(rng.uniform(-1.0, 1.0, n))
    H += np.diag(rng.uniform(0.2, 1.0, n - 1), 1)
    H += np.diag(rng.uniform(0.2, 1.0, n - 1), -1)
    return H


@pytest.mark.parametrize("n, x, expected", [(0, 0.7, 1.0), (1, 0.5, 0.5), (2, 0.5, -0.125)])
def test_legendre_eval(n, x, expected):
    assert legendre_eval(n, x) == pytest.approx(expected, abs=1e-15)


def test_legendre_table_matches_eval():
    x = np.linspace(-1.0, 1.0, 9)
    table = legendre_table(6, x)
    for n in range(7):
        np.testing.assert_allclose(table[n], legendre_eval(n, x), atol=1e-14)


def test_gauss_legendre_small_orders():
    one = gauss_legendre(1)
    np.testing.assert_array_equal(one.nodes, [0.0])
    np.testing.assert_array_equal(one.weights, [2.0])

    two = gauss_legendre(2)
    np.testing.assert_allclose(two.nodes, [-1 / np.sqrt(3.0), 1 / np.sqrt(3.0)], atol=1e-15)
    np.testing.assert_allclose(two.weights, [1.0, 1.0], atol=1e-15)


def test_gauss_legendre_exactness():
    quad = gauss_legendre(16)
    assert np.sum(quad.weights * quad.nodes ** 30) == pytest.approx(2.0 / 31.0, abs=1e-13)
    assert np.sum(quad.weights) == pytest.approx(2.0, abs=1e-13)
    assert np.all(np.diff(quad.nodes) > 0)


def test_gauss_legendre_nodes_are_legendre_roots():
    quad = gauss_legendre(7)
    np.testing.assert_allclose(legendre_eval(7, quad.nodes), 0.0, atol=1e-13)


def test_gauss_legendre_rejects_zero_order():
    with pytest.raises(RangeError):
        gauss_legendre(0)


@pytest.mark.parametrize("m, expected", [
    (1, [0.0, 1.0]),
    (2, [1 / 3, 0.0, 2 / 3]),
    (3, [0.0, 3 / 5, 0.0, 2 / 5]),
])
def test_monomial_to_legendre_row(m, expected):
    np.testing.assert_allclose(monomial_to_legendre_row(m), expected, atol=1e-15)


def test_monomial_rows_match_quadrature_projection():
    quad = gauss_legendre(40)
    B = basis_matrix(12)
    for m in range(13):
        for k in range(m + 1):
            projection = (2 * k + 1) / 2 * np.sum(quad.weights * quad.nodes ** m * legendre_eval(k, quad.nodes))
            assert B[m, k] == pytest.approx(projection, abs=1e-13)


def test_monomial_row_range():
    monomial_to_legendre_row(40)
    with pytest.raises(RangeError):
        monomial_to_legendre_row(41)


def test_poly_to_legendre_examples():
    np.testing.assert_allclose(poly_to_legendre([0.0, 0.0, 1.0]), [1 / 3, 0.0, 2 / 3], atol=1e-15)
    np.testing.assert_allclose(poly_to_legendre([5.0]), [5.0])
    np.testing.assert_allclose(poly_to_legendre([0.0, -0.6, 0.0, 1.0]), [0.0, 0.0, 0.0, 0.4], atol=1e-15)


def test_basis_change_round_trip():
    rng = np.random.default_rng(5)
    for degree in range(0, 11):
        c = rng.uniform(-1.0, 1.0, degree + 1)
        np.testing.assert_allclose(legendre_to_poly(poly_to_legendre(c)), c, atol=1e-11)


def test_basis_change_round_trip_degree_20():
    rng = np.random.default_rng(7)
    for degree in range(11, 21):
        c = rng.uniform(-1.0, 1.0, degree + 1)
        alpha = poly_to_legendre(c)
        np.testing.assert_allclose(legendre_to_poly(alpha), c, atol=1e-9)
        np.testing.assert_allclose(poly_to_legendre(legendre_to_poly(alpha)), alpha, atol=1e-9)


def test_basis_change_preserves_values_degree_20():
    rng = np.random.default_rng(6)
    c = rng.uniform(-1.0, 1.0, 21)
    x = np.linspace(-1.0, 1.0, 41)
    np.testing.assert_allclose(legendre_series_eval(poly_to_legendre(c), x), poly_eval(c, x), atol=1e-11)


@pytest.mark.parametrize("roots, expected", [
    ([1.0, 2.0, 3.0], [-6.0, 11.0, -6.0, 1.0]),
    ([0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]),
    ([-0.7, 0.7], [-0.49, 0.0, 1.0]),
])
def test_vieta_coeffs(roots, expected):
    np.testing.assert_allclose(vieta_coeffs(roots), expected, atol=1e-14)


def test_poly_roots_examples():
    np.testing.assert_allclose(poly_roots([-1 / 3, 0.0, 1.0]).real, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-14)
    np.testing.assert_allclose(poly_roots([-5.0, 1.0]), [5.0], atol=1e-14)


def test_poly_roots_degenerate():
    with pytest.raises(DegenerateInputError):
        poly_roots([1.0, 2.0, 0.0])
    with pytest.raises(DegenerateInputError):
        poly_roots([3.0])


def test_vieta_then_roots_recovers_roots():
    rng = np.random.default_rng(12)
    for n in range(1, 11):
        r = separated_roots(rng, n)
        recovered = poly_roots(vieta_coeffs(r))
        np.testing.assert_allclose(recovered.imag, 0.0, atol=1e-8)
        np.testing.assert_allclose(np.sort(recovered.real), r, atol=1e-8)


def test_associated_poly_seq_p1_matrix():
    q = associated_poly_seq([[0.0, 1.0], [1 / 3, 0.0]])
    assert len(q) == 3
    np.testing.assert_allclose(q[0], [1.0])
    np.testing.assert_allclose(q[1], [0.0, 1.0])
    np.testing.assert_allclose(q[2], [-1 / 3, 0.0, 1.0], atol=1e-15)


def test_associated_poly_seq_scalar():
    q = associated_poly_seq([[0.25]])
    np.testing.assert_allclose(q[1], [-0.25, 1.0])


def test_associated_poly_seq_p2_closure():
    H = weights_to_matrix(np.zeros(3))
    q = associated_poly_seq(H)
    rho = hessenberg_rho(H)
    assert rho == pytest.approx(2 / 3, abs=1e-15)
    np.testing.assert_allclose(q[3], [0.0, -0.9, 0.0, 1.5], atol=1e-14)
    np.testing.assert_allclose(rho * q[3], [0.0, -0.6, 0.0, 1.0], atol=1e-14)
    # q_3 = (3/5) P_3
    np.testing.assert_allclose(poly_to_legendre(q[3]), [0.0, 0.0, 0.0, 0.6], atol=1e-14)


def test_associated_poly_roots_are_eigenvalues():
    H = weights_to_matrix(np.zeros(5))
    q = associated_poly_seq(H)
    roots = np.sort(poly_roots(q[-1]).real)
    np.testing.assert_allclose(roots, gauss_legendre(6).nodes, atol=1e-10)


def test_associated_polys_of_jacobi_matrix_have_simple_real_roots():
    rng = np.random.default_rng(21)
    for n in (3, 5, 8):
        q = associated_poly_seq(jacobi_matrix(rng, n))
        for i in range(1, n + 1):
            roots = poly_roots(q[i])
            assert np.all(np.abs(roots.imag) < 1e-8)
            if i > 1:
                assert np.min(np.diff(np.sort(roots.real))) > 1e-8


def test_associated_poly_seq_rejects_reduced_matrix():
    H = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    with pytest.raises(StructureError) as info:
        associated_poly_seq(H)
    assert info.value.entry == (0, 1)


def test_associated_poly_seq_rejects_upper_entries():
    H = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    with pytest.raises(StructureError) as info:
        associated_poly_seq(H)
    assert info.value.entry == (0, 2)


def lower_hessenberg(rng, n: int) -> np.ndarray:
    """General unreduced lower Hessenberg matrix with superdiagonal magnitudes in [0.5, 1.5]"""
    H = np.tril(rng.normal(size=(n, n)))
    if n > 1:
        H += np.diag(rng.uniform(0.5, 1.5, n - 1) * rng.choice([-1.0, 1.0], n - 1), 1)
    return H


def match_nearest(found: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Reorder found so each entry pairs with the closest unused reference entry"""
    remaining = list(found)
    ordered = []
    for value in reference:
        k = int(np.argmin([abs(value - f) for f in remaining]))
        ordered.append(remaining.pop(k))
    return np.array(ordered)


def test_associated_poly_roots_match_hessenberg_eigenvalues():
    rng = np.random.default_rng(50)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        H = lower_hessenberg(rng, n)
        q = associated_poly_seq(H)
        eigs = np.linalg.eigvals(H)
        roots = match_nearest(poly_roots(q[n]), eigs)
        assert np.all(np.abs(roots - eigs) <= 1e-7 * (1.0 + np.abs(eigs)))


def test_characteristic_polynomial_is_rho_times_last_associated():
    rng = np.random.default_rng(51)
    x = np.linspace(-2.0, 2.0, 13)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        H = lower_hessenberg(rng, n)
        q = associated_poly_seq(H)
        rho = hessenberg_rho(H)
        det = np.array([np.linalg.det(xi * np.eye(n) - H) for xi in x])
        scale = np.abs(det) + abs(rho) * poly_eval(np.abs(q[n]), np.abs(x))
        assert np.all(np.abs(det - rho * poly_eval(q[n], x)) <= 1e-9 * scale)


def test_associated_polys_form_eigenvectors():
    rng = np.random.default_rng(52)
    for _ in range(50):
        n = int(rng.integers(2, 9))
        H = lower_hessenberg(rng, n)
        q = associated_poly_seq(H)
        for lam in np.linalg.eigvals(H):
            # (q_0(lam), ..., q_{n-1}(lam)) is a right eigenvector
            v = np.array([np.polyval(qi[::-1], lam) for qi in q[:n]])
            assert v[0] == 1.0
            residual = H @ v - lam * v
            assert np.linalg.norm(residual) <= 1e-8 * (1.0 + abs(lam)) * np.linalg.norm(v)
