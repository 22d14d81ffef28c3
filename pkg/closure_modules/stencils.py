"""
Finite-difference stencils on periodic grids

- WENO5 face reconstruction (Jiang-Shu smoothness indicators, "js" or "z" weights)
- upwind and Lax-Friedrichs split WENO5 derivatives of conservative fluxes
- frozen-coefficient WENO5 derivative of A(x_j) m for quasilinear systems
- 4th-order central differences
- SSP-RK3 step in Shu-Osher form

The grid always runs along the last axis.
"""

from typing import Callable

import numpy as np

from .errors import UsageError

WENO_VARIANTS = ("z", "js")

# linear weights of the three candidate stencils
_D0, _D1, _D2 = 0.1, 0.6, 0.3

JS_EPSILON = 1e-6
Z_EPSILON = 1e-40
Z_POWER = 2


def weno5_face(a, b, c, d, e, variant: str = "z"):
    """Reconstruction at the face right of ``c`` from the five values a..e (left to right)

    Mirror the argument order (e, d, c, b, a) for the right-biased value.
    """
    q0 = (2.0 * a - 7.0 * b + 11.0 * c) / 6.0
    q1 = (-b + 5.0 * c + 2.0 * d) / 6.0
    q2 = (2.0 * c + 5.0 * d - e) / 6.0

    beta0 = 13.0 / 12.0 * (a - 2.0 * b + c) ** 2 + 0.25 * (a - 4.0 * b + 3.0 * c) ** 2
    beta1 = 13.0 / 12.0 * (b - 2.0 * c + d) ** 2 + 0.25 * (b - d) ** 2
    beta2 = 13.0 / 12.0 * (c - 2.0 * d + e) ** 2 + 0.25 * (3.0 * c - 4.0 * d + e) ** 2

    if variant == "z":
        tau5 = np.abs(beta0 - beta2)
        alpha0 = _D0 * (1.0 + (tau5 / (beta0 + Z_EPSILON)) ** Z_POWER)
        alpha1 = _D1 * (1.0 + (tau5 / (beta1 + Z_EPSILON)) ** Z_POWER)
        alpha2 = _D2 * (1.0 + (tau5 / (beta2 + Z_EPSILON)) ** Z_POWER)
    elif variant == "js":
        alpha0 = _D0 / (JS_EPSILON + beta0) ** 2
        alpha1 = _D1 / (JS_EPSILON + beta1) ** 2
        alpha2 = _D2 / (JS_EPSILON + beta2) ** 2
    else:
        raise UsageError(f"unknown WENO variant '{variant}', expected one of {WENO_VARIANTS}")

    total = alpha0 + alpha1 + alpha2
    return (alpha0 * q0 + alpha1 * q1 + alpha2 * q2) / total


def _shift(u: np.ndarray, s: int) -> np.ndarray:
    """u[j + s] on the periodic grid"""
    return np.roll(u, -s, axis=-1)


def weno5_upwind_derivative(u, dx: float, direction: int = 1, variant: str = "z") -> np.ndarray:
    """Derivative of a flux ``u`` travelling in ``direction`` (+1 right, -1 left)"""
    u = np.asarray(u, dtype=float)
    if direction > 0:
        face = weno5_face(_shift(u, -2), _shift(u, -1), u, _shift(u, 1), _shift(u, 2), variant)
    else:
        face = weno5_face(_shift(u, 3), _shift(u, 2), _shift(u, 1), u, _shift(u, -1), variant)
    return (face - _shift(face, -1)) / dx


def lf_split_derivative(flux, u, alpha: float, dx: float, variant: str = "z") -> np.ndarray:
    """Conservative WENO5 derivative of ``flux`` with global Lax-Friedrichs splitting

    f+ = (flux + alpha u)/2 is reconstructed left-biased, f- = (flux - alpha u)/2
    right-biased.
    """
    flux = np.asarray(flux, dtype=float)
    u = np.asarray(u, dtype=float)
    plus = 0.5 * (flux + alpha * u)
    minus = 0.5 * (flux - alpha * u)
    return (weno5_upwind_derivative(plus, dx, 1, variant)
            + weno5_upwind_derivative(minus, dx, -1, variant))


def frozen_flux_derivative(A, m, alpha: float, dx: float, variant: str = "z") -> np.ndarray:
    """WENO5 approximation of A(x_j) d/dx m at every grid point j

    Each point freezes its own matrix A_j and differentiates the flux A_j m
    over its seven-point stencil with global Lax-Friedrichs splitting. For a
    constant A this is the conservative scheme of ``lf_split_derivative``.

    Args:
        A: (Nx, n, n) matrices per grid point
        m: (n, Nx) field
        alpha: global splitting speed
        dx: grid spacing
        variant: WENO weights, "z" or "js"

    Returns:
        (n, Nx) approximation of A m_x
    """
    A = np.asarray(A, dtype=float)
    m = np.asarray(m, dtype=float)
    # offsets -3..3 -> index 0..6
    stencil = np.stack([_shift(m, s) for s in range(-3, 4)])
    frozen = np.einsum("jkl,slj->skj", A, stencil)
    plus = 0.5 * (frozen + alpha * stencil)
    minus = 0.5 * (frozen - alpha * stencil)

    plus_right = weno5_face(plus[1], plus[2], plus[3], plus[4], plus[5], variant)
    plus_left = weno5_face(plus[0], plus[1], plus[2], plus[3], plus[4], variant)
    minus_right = weno5_face(minus[6], minus[5], minus[4], minus[3], minus[2], variant)
    minus_left = weno5_face(minus[5], minus[4], minus[3], minus[2], minus[1], variant)
    return (plus_right - plus_left + minus_right - minus_left) / dx


def central_difference4(u, dx: float) -> np.ndarray:
    """Fourth-order central difference on the periodic grid"""
    u = np.asarray(u, dtype=float)
    return (-_shift(u, 2) + 8.0 * _shift(u, 1) - 8.0 * _shift(u, -1) + _shift(u, -2)) / (12.0 * dx)


def ssp_rk3_step(rhs: Callable[[np.ndarray], np.ndarray], u: np.ndarray, dt: float) -> np.ndarray:
    """One SSP-RK3 step (Shu-Osher convex combination form)"""
    u1 = u + dt * rhs(u)
    u2 = 0.75 * u + 0.25 * (u1 + dt * rhs(u1))
    return u / 3.0 + 2.0 / 3.0 * (u2 + dt * rhs(u2))
