"""
Dense real matrix algebra and nonsymmetric eigenvalues

Provides:
- Householder reduction to upper Hessenberg form
- Francis double-shift QR eigenvalues (real arithmetic, conjugate pairs from 2x2 blocks)
- Max real part of spec(S + i*xi*A) through the 2n real block embedding
- A batched eigenvalue path for per-grid-point diagnostics

Spectra are returned as complex numpy arrays sorted by (real, imag).
"""

import logging
import math
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, DimensionError

logger = logging.getLogger(__name__)

# Relative deflation tolerance for the QR iteration
DEFLATION_TOL = 1e-14

# Sweep budget per matrix order
SWEEPS_PER_ORDER = 100


def as_square(M) -> np.ndarray:
    """Validate and copy a square, finite matrix

    Args:
        M: array-like of shape (n, n)

    Returns:
        float64 copy of M
    """
    a = np.array(M, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionError("matrix has non-finite entries")
    return a


def sort_spectrum(values: np.ndarray) -> np.ndarray:
    """Sort eigenvalues by (real asc, imag asc) along the last axis"""
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((values.imag, values.real), axis=-1)
    return np.take_along_axis(values, order, axis=-1)


def hessenberg_reduce(M) -> np.ndarray:
    """Reduce a square matrix to upper Hessenberg form by Householder reflections

    Columns that are already in Hessenberg form are left untouched.

    Args:
        M: square matrix

    Returns:
        Upper Hessenberg matrix orthogonally similar to M
    """
    H = as_square(M)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        if not np.any(x[1:]):
            continue
        norm_x = np.linalg.norm(x)
        alpha = -math.copysign(norm_x, x[0])
        v = x
        v[0] -= alpha
        v /= np.linalg.norm(v)
        H[k + 1:, k:] -= 2.0 * np.outer(v, v @ H[k + 1:, k:])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
    return H


def _francis_qr(a: np.ndarray, tol: float = DEFLATION_TOL) -> np.ndarray:
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR

    Works in place on ``a``. Deflates 1x1 and 2x2 trailing blocks; a 2x2 block
    with negative discriminant yields an exact conjugate pair.
    """
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = float(np.sum(np.abs(np.triu(a, -1))))
    max_sweeps = SWEEPS_PER_ORDER * n
    sweeps = 0
    its = 0
    t = 0.0
    nn = n - 1
    while nn >= 0:
        l = nn
        while l > 0:
            s = abs(a[l - 1, l - 1]) + abs(a[l, l])
            if s == 0.0:
                s = anorm
            if abs(a[l, l - 1]) <= tol * s:
                a[l, l - 1] = 0.0
                break
            l -= 1

        x = a[nn, nn]
        if l == nn:
            wr[nn] = x + t
            nn -= 1
            its = 0
            continue

        y = a[nn - 1, nn - 1]
        w = a[nn, nn - 1] * a[nn - 1, nn]
        if l == nn - 1:
            p = 0.5 * (y - x)
            q = p * p + w
            z = math.sqrt(abs(q))
            x += t
            if q >= 0.0:
                z = p + math.copysign(z, p)
                wr[nn - 1] = wr[nn] = x + z
                if z != 0.0:
                    wr[nn] = x - w / z
            else:
                wr[nn - 1] = wr[nn] = x + p
                wi[nn - 1] = z
                wi[nn] = -z
            nn -= 2
            its = 0
            continue

        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"QR iteration did not converge after {sweeps} sweeps; "
                f"active trailing block rows {l}..{nn}",
                block=(l, nn),
            )

        if its > 0 and its % 10 == 0:
            # exceptional shift
            t += x
            idx = np.arange(nn + 1)
            a[idx, idx] -= x
            s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
            x = y = 0.75 * s
            w = -0.4375 * s * s
        its += 1
        sweeps += 1

        m = nn - 2
        while m >= l:
            z = a[m, m]
            r = x - z
            s = y - z
            p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
            q = a[m + 1, m + 1] - z - r - s
            r = a[m + 2, m + 1]
            s = abs(p) + abs(q) + abs(r)
            p /= s
            q /= s
            r /= s
            if m == l:
                break
            u = abs(a[m, m - 1]) * (abs(q) + abs(r))
            v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
            if u <= tol * v:
                break
            m -= 1

        for i in range(m + 2, nn + 1):
            a[i, i - 2] = 0.0
            if i != m + 2:
                a[i, i - 3] = 0.0

        for k in range(m, nn):
            if k != m:
                p = a[k, k - 1]
                q = a[k + 1, k - 1]
                r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                x = abs(p) + abs(q) + abs(r)
                if x != 0.0:
                    p /= x
                    q /= x
                    r /= x
            s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
            if s == 0.0:
                continue
            if k == m:
                if l != m:
                    a[k, k - 1] = -a[k, k - 1]
            else:
                a[k, k - 1] = -s * x
            p += s
            x = p / s
            y = q / s
            z = r / s
            q /= p
            r /= p
            cols = slice(k, nn + 1)
            if k != nn - 1:
                pv = a[k, cols] + q * a[k + 1, cols] + r * a[k + 2, cols]
                a[k + 2, cols] -= pv * z
            else:
                pv = a[k, cols] + q * a[k + 1, cols]
            a[k + 1, cols] -= pv * y
            a[k, cols] -= pv * x

            rows = slice(l, min(nn, k + 3) + 1)
            if k != nn - 1:
                pv = x * a[rows, k] + y * a[rows, k + 1] + z * a[rows, k + 2]
                a[rows, k + 2] -= pv * r
            else:
                pv = x * a[rows, k] + y * a[rows, k + 1]
            a[rows, k + 1] -= pv * q
            a[rows, k] -= pv

    logger.debug(f"QR converged: order {n}, {sweeps} sweeps")
    return wr + 1j * wi


def eigenvalues(M) -> np.ndarray:
    """Eigenvalues of a real square matrix

    Args:
        M: square matrix (desk scale, n up to ~100)

    Returns:
        Complex spectrum sorted by (real, imag)

    Raises:
        DimensionError: non-square or non-finite input
        ConvergenceError: QR sweep budget (100 * n) exhausted
    """
    a = as_square(M)
    if a.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    H = hessenberg_reduce(a)
    return sort_spectrum(_francis_qr(H))


def eigenvalues_batched(stack) -> np.ndarray:
    """Sorted eigenvalues of a stack of square matrices (shape (..., n, n))

    LAPACK through numpy; used where thousands of small spectra are needed
    per time step.
    """
    stack = np.asarray(stack)
    if stack.ndim < 2 or stack.shape[-1] != stack.shape[-2]:
        raise DimensionError(f"expected a stack of square matrices, got shape {stack.shape}")
    return sort_spectrum(np.linalg.eigvals(stack))


def shifted_block(A, S, xi: float) -> np.ndarray:
    """Real 2n x 2n embedding [[S, -xi A], [xi A, S]] of S + i xi A"""
    A = as_square(A)
    S = as_square(S)
    if A.shape != S.shape:
        raise DimensionError(f"A {A.shape} and S {S.shape} differ in order")
    return np.block([[S, -xi * A], [xi * A, S]])


def max_real_part_shifted(A, S, xi: float) -> float:
    """Largest real part over the spectrum of (i xi A + S)

    The real block embedding has spectrum spec(S + i xi A) united with its
    conjugate, so its real parts are exactly the ones wanted.

    Args:
        A: closure coefficient matrix
        S: diagonal source Jacobian of the same order
        xi: wave number

    Returns:
        max Re(lambda)
    """
    return float(np.max(eigenvalues(shifted_block(A, S, xi)).real))


def max_real_part_shifted_batched(A_stack, s_diag, xis: Sequence[float]) -> np.ndarray:
    """Max real part of spec(i xi A_p + S_p) for every matrix p and every xi

    Args:
        A_stack: (P, n, n) coefficient matrices
        s_diag: (P, n) or (n,) diagonal of the source Jacobians
        xis: wave numbers

    Returns:
        (P, len(xis)) array of max real parts
    """
    A_stack = np.asarray(A_stack, dtype=float)
    if A_stack.ndim == 2:
        A_stack = A_stack[None]
    n = A_stack.shape[-1]
    s_diag = np.broadcast_to(np.asarray(s_diag, dtype=float), A_stack.shape[:-1])
    xis = np.asarray(xis, dtype=float)
    S = np.zeros(A_stack.shape, dtype=complex)
    S[..., np.arange(n), np.arange(n)] = s_diag
    shifted = 1j * xis[None, :, None, None] * A_stack[:, None] + S[:, None]
    return np.max(np.linalg.eigvals(shifted).real, axis=-1)
