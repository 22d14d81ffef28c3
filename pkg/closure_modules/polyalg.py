"""
Legendre polynomial machinery and polynomial algebra

Provides:
- Legendre evaluation by the three-term recurrence
- Gauss-Legendre quadrature (Newton iteration from Chebyshev guesses)
- Monomial-to-Legendre basis change (rows b_{m,k})
- Vieta expansion of roots into monic coefficients
- Companion-matrix root finding
- The associated polynomial sequence of an unreduced lower Hessenberg matrix

Polynomials are coefficient arrays in increasing degree order (c_0 .. c_d).
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List

import numpy as np

from .errors import ConvergenceError, DegenerateInputError, RangeError, StructureError
from .linalg import as_square, eigenvalues

logger = logging.getLogger(__name__)

# b_{mk} stays inside double range up to here
MAX_DEGREE = 40

NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class Quadrature:
    """Gauss-Legendre rule on (-1, 1)"""
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.nodes)


def legendre_eval(n: int, x):
    """Evaluate P_n(x) by upward recurrence (works on scalars and arrays)"""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = x.copy()
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    return p if p.ndim else float(p)


def legendre_table(n_max: int, x) -> np.ndarray:
    """All P_0..P_{n_max} at x, shape (n_max + 1, *x.shape)"""
    x = np.asarray(x, dtype=float)
    table = np.empty((n_max + 1,) + x.shape)
    table[0] = 1.0
    if n_max >= 1:
        table[1] = x
    for k in range(1, n_max):
        table[k + 1] = ((2 * k + 1) * x * table[k] - k * table[k - 1]) / (k + 1)
    return table


def _legendre_with_derivative(n: int, x: np.ndarray):
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> Quadrature:
    """Gauss-Legendre nodes and weights of order n

    Args:
        n: number of nodes (n >= 1)

    Returns:
        Quadrature with strictly increasing nodes and weights summing to 2

    Raises:
        ConvergenceError: Newton iteration did not converge in 100 steps
    """
    if n < 1:
        raise RangeError(f"quadrature order must be >= 1, got {n}")
    if n == 1:
        return Quadrature(np.array([0.0]), np.array([2.0]))
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(NEWTON_MAX_ITER):
        p, dp = _legendre_with_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    else:
        raise ConvergenceError(f"Newton iteration for Gauss-Legendre order {n} did not converge")
    _, dp = _legendre_with_derivative(n, x)
    weights = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    nodes = x[order]
    weights = weights[order]
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Quadrature(nodes, weights)


def monomial_to_legendre_row(m: int) -> np.ndarray:
    """Coefficients b_{m,0..m} with x^m = sum_k b_{mk} P_k(x)

    F(m, j) = m! (2m - 4j + 1) / (2^j j! (2m - 2j + 1)!!) is built by ratio
    updates in j, never from raw factorials.
    """
    if m < 0 or m > MAX_DEGREE:
        raise RangeError(f"monomial degree {m} outside supported range 0..{MAX_DEGREE}")
    return _basis_matrix(MAX_DEGREE)[m, :m + 1].copy()


@lru_cache(maxsize=1)
def _basis_matrix(d: int) -> np.ndarray:
    B = np.zeros((d + 1, d + 1))
    for m in range(d + 1):
        # F(m,0) = m!/(2m-1)!! = prod_{i=1..m} i/(2i-1)
        ratio = 1.0
        for i in range(1, m + 1):
            ratio *= i / (2 * i - 1)
        # G(j) = m! / (2^j j! (2m-2j+1)!!), F(m,j) = (2m-4j+1) G(j)
        g = ratio / (2 * m + 1)
        for j in range(m // 2 + 1):
            B[m, m - 2 * j] = (2 * m - 4 * j + 1) * g
            g *= (2 * m - 2 * j + 1) / (2.0 * (j + 1))
    B.setflags(write=False)
    return B


def basis_matrix(d: int) -> np.ndarray:
    """Lower-triangular matrix with rows b_{m,.} for m = 0..d"""
    if d < 0 or d > MAX_DEGREE:
        raise RangeError(f"degree {d} outside supported range 0..{MAX_DEGREE}")
    return _basis_matrix(MAX_DEGREE)[:d + 1, :d + 1]


def poly_to_legendre(c) -> np.ndarray:
    """Monomial coefficients to Legendre coefficients: alpha_k = sum_i c_i b_{ik}"""
    c = np.asarray(c, dtype=float)
    return c @ basis_matrix(len(c) - 1)


def legendre_to_poly(alpha) -> np.ndarray:
    """Legendre coefficients back to monomial coefficients"""
    alpha = np.asarray(alpha, dtype=float)
    d = len(alpha) - 1
    # monomial coefficients of P_0..P_d by the recurrence
    P = np.zeros((d + 1, d + 1))
    P[0, 0] = 1.0
    if d >= 1:
        P[1, 1] = 1.0
    for k in range(1, d):
        P[k + 1, 1:] = (2 * k + 1) * P[k, :-1] / (k + 1)
        P[k + 1] -= k * P[k - 1] / (k + 1)
    return alpha @ P


def poly_eval(c, x):
    """Horner evaluation of sum_i c_i x^i"""
    c = np.asarray(c, dtype=float)
    x = np.asarray(x, dtype=float)
    result = np.zeros_like(x)
    for coeff in c[::-1]:
        result = result * x + coeff
    return result


def legendre_series_eval(alpha, x):
    """Evaluate sum_k alpha_k P_k(x)"""
    alpha = np.asarray(alpha, dtype=float)
    table = legendre_table(len(alpha) - 1, x)
    return np.tensordot(alpha, table, axes=1)


def vieta_coeffs(roots) -> np.ndarray:
    """Monic coefficients of prod_i (x - r_i), built one factor at a time

    Args:
        roots: n >= 1 real roots

    Returns:
        (c_0, ..., c_{n-1}, 1)
    """
    roots = np.asarray(roots, dtype=float)
    c = np.array([1.0])
    for r in roots:
        shifted = np.concatenate(([0.0], c))
        shifted[:-1] -= r * c
        c = shifted
    return c


def poly_roots(c) -> np.ndarray:
    """Roots of sum_i c_i x^i as eigenvalues of the companion matrix

    Raises:
        DegenerateInputError: degree < 1 or zero leading coefficient
    """
    c = np.asarray(c, dtype=float)
    if len(c) < 2:
        raise DegenerateInputError("polynomial degree must be >= 1")
    if c[-1] == 0.0:
        raise DegenerateInputError("leading coefficient is zero")
    d = len(c) - 1
    companion = np.zeros((d, d))
    companion[1:, :-1] = np.eye(d - 1)
    companion[:, -1] = -c[:-1] / c[-1]
    return eigenvalues(companion)


def check_lower_hessenberg(H: np.ndarray) -> None:
    """Raise StructureError unless H is unreduced lower Hessenberg"""
    n = H.shape[0]
    for i in range(n):
        for j in range(i + 2, n):
            if H[i, j] != 0.0:
                raise StructureError(
                    f"entry ({i}, {j}) = {H[i, j]} lies above the first superdiagonal",
                    entry=(i, j),
                )
    for i in range(n - 1):
        if H[i, i + 1] == 0.0:
            raise StructureError(
                f"superdiagonal entry ({i}, {i + 1}) is zero: matrix is reduced",
                entry=(i, i + 1),
            )


def associated_poly_seq(H) -> List[np.ndarray]:
    """Associated polynomial sequence q_0..q_n of an unreduced lower Hessenberg matrix

    q_0 = 1 and, with h_{n,n+1} := 1,
    q_i = (x q_{i-1} - sum_{j<=i} h_{ij} q_{j-1}) / h_{i,i+1}   (1-based indices)

    Returns:
        list of monomial coefficient arrays; q_i has degree i
    """
    H = as_square(H)
    check_lower_hessenberg(H)
    n = H.shape[0]
    q: List[np.ndarray] = [np.array([1.0])]
    for i in range(n):
        nxt = np.zeros(i + 2)
        nxt[1:] = q[i]
        for j in range(i + 1):
            nxt[:j + 1] -= H[i, j] * q[j]
        superdiag = H[i, i + 1] if i + 1 < n else 1.0
        q.append(nxt / superdiag)
    return q


def hessenberg_rho(H) -> float:
    """Product of the superdiagonal entries of H"""
    H = as_square(H)
    return float(np.prod(np.diag(H, 1))) if H.shape[0] > 1 else 1.0
