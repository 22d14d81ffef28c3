"""
Closure weights, coefficient matrices and spectra

Provides:
- weights_to_matrix / spectrum_to_weights: the two directions between the
  gradient-ansatz weights N_k and the eigenvalues of the closure matrix A
- char_poly_legendre: Legendre form of q_{N+1}
- P_N and ML closures behind one interface (Closure subclasses)
- Hyperbolicity and linear-stability diagnostics

Weights arrays have shape (..., N+1); matrices (..., N+1, N+1).
"""

import json
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, NumericError, UnsupportedOrderError
from .linalg import eigenvalues, max_real_part_shifted, sort_spectrum
from .polyalg import basis_matrix, gauss_legendre

logger = logging.getLogger(__name__)

# Threshold on Re(lambda) above which a wave number counts as unstable
UNSTABLE_TOL = 1e-8

DEFAULT_THRESHOLDS = (1e-3, 1e-4, 1e-5, 1e-6)


def closure_rho(N: int) -> float:
    """rho = N!/(2N-1)!!, the product of the superdiagonal of A"""
    rho = 1.0
    for i in range(1, N + 1):
        rho *= i / (2 * i - 1)
    return rho


@lru_cache(maxsize=64)
def transport_matrix(N: int) -> np.ndarray:
    """Closure matrix with a zero last row (rows 0..N-1 of the moment hierarchy)"""
    if N < 1:
        raise UnsupportedOrderError(f"closure order must be >= 1, got {N}")
    A = np.zeros((N + 1, N + 1))
    for i in range(N):
        if i > 0:
            A[i, i - 1] = i / (2 * i + 1)
        A[i, i + 1] = (i + 1) / (2 * i + 1)
    A.setflags(write=False)
    return A


@lru_cache(maxsize=64)
def c_to_weights_matrix(N: int) -> np.ndarray:
    """Linear map (N+2) x (N+1) from monic coefficients (c_0..c_N, 1) to weights

    N_k = -(2N+1)/(rho (N+1)) * sum_{i=k}^{N+1} c_i b_{ik}
    """
    if N < 1:
        raise UnsupportedOrderError(f"closure order must be >= 1, got {N}")
    B = basis_matrix(N + 1)[:, :N + 1]
    M = -(2 * N + 1) / (closure_rho(N) * (N + 1)) * B
    M.setflags(write=False)
    return M


def _order_of(w) -> int:
    N = np.shape(w)[-1] - 1
    if N < 1:
        raise UnsupportedOrderError(f"closure order must be >= 1, got {N}")
    return N


def weights_to_matrix(w) -> np.ndarray:
    """Assemble the closure coefficient matrix A from weights

    a_j = (N+1)/(2N+1) N_j, plus N/(2N+1) on j = N-1.

    Args:
        w: weights, shape (..., N+1)

    Returns:
        A, shape (..., N+1, N+1)
    """
    w = np.asarray(w, dtype=float)
    N = _order_of(w)
    A = np.broadcast_to(transport_matrix(N), w.shape[:-1] + (N + 1, N + 1)).copy()
    A[..., N, :] = (N + 1) / (2 * N + 1) * w
    A[..., N, N - 1] += N / (2 * N + 1)
    return A


def char_poly_legendre(w) -> np.ndarray:
    """Legendre coefficients of q_{N+1} = (N+1)/(2N+1) P_{N+1} + N/(2N+1) P_{N-1} - sum a_k P_k

    rho * q_{N+1} is the characteristic polynomial of weights_to_matrix(w).
    """
    w = np.asarray(w, dtype=float)
    N = _order_of(w)
    a = weights_to_matrix(w)[N]
    alpha = np.zeros(N + 2)
    alpha[N + 1] = (N + 1) / (2 * N + 1)
    alpha[N - 1] += N / (2 * N + 1)
    alpha[:N + 1] -= a
    return alpha


def vieta_batched(r: np.ndarray) -> np.ndarray:
    """Monic coefficients of prod (x - r_i) for each row of r, shape (..., n+1)"""
    r = np.asarray(r, dtype=float)
    n = r.shape[-1]
    c = np.zeros(r.shape[:-1] + (n + 1,))
    c[..., 0] = 1.0
    for i in range(n):
        # multiply the degree-i polynomial in c[..., :i+1] by (x - r_i)
        head = c[..., :i + 1].copy()
        c[..., 1:i + 2] = head
        c[..., 0] = 0.0
        c[..., :i + 1] -= r[..., i:i + 1] * head
    return c


def spectrum_to_weights(r) -> np.ndarray:
    """Weights whose closure matrix has spectrum r

    Vieta expansion to monic coefficients, then the fixed linear map to N_k.
    Repeated eigenvalues are accepted.

    Args:
        r: eigenvalues, shape (..., N+1)

    Returns:
        weights, shape (..., N+1)
    """
    r = np.asarray(r, dtype=float)
    N = _order_of(r)
    return vieta_batched(r) @ c_to_weights_matrix(N)


def closure_spectrum(w) -> np.ndarray:
    """Sorted complex eigenvalues of weights_to_matrix(w)"""
    return eigenvalues(weights_to_matrix(w))


def pn_closure(m) -> np.ndarray:
    """P_N closure: all weights zero, for any moments"""
    m = np.asarray(m, dtype=float)
    _order_of(m)
    return np.zeros(m.shape)


def ml_closure(model, m) -> np.ndarray:
    """Weights from a trained model (see nn.MlpModel.closure_weights)"""
    m = np.asarray(m, dtype=float)
    if m.shape[-1] != model.order + 1:
        raise DimensionError(
            f"model of order {model.order} expects {model.order + 1} moments, got {m.shape[-1]}"
        )
    weights, _ = model.closure_weights(m)
    return weights


@dataclass(frozen=True)
class SourceJacobian:
    """Scattering and absorption coefficients of S_U = diag(-sa, -(ss+sa), ...)"""
    sigma_s: float
    sigma_a: float

    def __post_init__(self):
        if self.sigma_s < 0 or self.sigma_a < 0:
            raise ValueError("cross sections must be nonnegative")

    def diagonal(self, N: int) -> np.ndarray:
        d = np.full(N + 1, -(self.sigma_s + self.sigma_a))
        d[0] = -self.sigma_a
        return d

    def matrix(self, N: int) -> np.ndarray:
        return np.diag(self.diagonal(N))


@dataclass
class HyperbolicityReport:
    """Summary of one spectrum"""
    all_real: bool
    max_abs_eig: float
    min_gap: float
    close_pair_counts: Dict[float, int] = field(default_factory=dict)
    unstable_xi_count: int = 0

    def to_json(self) -> str:
        record = asdict(self)
        record["close_pair_counts"] = {repr(k): v for k, v in self.close_pair_counts.items()}
        return json.dumps(record)


def is_real_spectrum(spec: np.ndarray) -> np.ndarray:
    """|Im| <= 1e-10 (1 + |Re|) for every eigenvalue along the last axis"""
    spec = np.asarray(spec, dtype=complex)
    return np.all(np.abs(spec.imag) <= 1e-10 * (1.0 + np.abs(spec.real)), axis=-1)


def hyperbolicity_check(spec, thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                        unstable_xi_count: int = 0) -> HyperbolicityReport:
    """Classify a spectrum: realness, largest speed, minimal gap, close pairs

    Args:
        spec: eigenvalues (complex allowed)
        thresholds: gap thresholds epsilon
        unstable_xi_count: carried over from a linear-stability scan

    Returns:
        HyperbolicityReport
    """
    spec = sort_spectrum(np.asarray(spec, dtype=complex))
    gaps = np.diff(np.sort(spec.real))
    min_gap = float(np.min(gaps)) if len(gaps) else math.inf
    return HyperbolicityReport(
        all_real=bool(is_real_spectrum(spec)),
        max_abs_eig=float(np.max(np.abs(spec))) if len(spec) else 0.0,
        min_gap=min_gap,
        close_pair_counts={eps: int(np.sum(gaps < eps)) for eps in thresholds},
        unstable_xi_count=unstable_xi_count,
    )


@dataclass
class StabilityScan:
    """Result of linear_stability_scan"""
    xis: np.ndarray
    max_real: np.ndarray
    unstable_count: int


def linear_stability_scan(w, source: SourceJacobian, xi_min: int = -100,
                          xi_max: int = 100) -> StabilityScan:
    """Max Re spec(i xi A + S_U) for every integer xi in [xi_min, xi_max]"""
    A = weights_to_matrix(w)
    S = source.matrix(A.shape[0] - 1)
    xis = np.arange(xi_min, xi_max + 1)
    values = np.array([max_real_part_shifted(A, S, float(xi)) for xi in xis])
    unstable = int(np.sum(values > UNSTABLE_TOL))
    if unstable:
        logger.info(f"linear stability scan: {unstable} unstable wave numbers")
    return StabilityScan(xis=xis, max_real=values, unstable_count=unstable)


def grid_spectrum_summary(spectra: np.ndarray,
                          thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> Dict[str, object]:
    """Vectorized diagnostics over per-grid-point spectra of shape (P, N+1)

    Close counts are numbers of grid points owning at least one adjacent
    gap below each threshold.
    """
    spectra = np.asarray(spectra, dtype=complex)
    real_sorted = np.sort(spectra.real, axis=-1)
    gaps = np.diff(real_sorted, axis=-1)
    point_min_gap = np.min(gaps, axis=-1)
    return {
        "all_real": bool(np.all(is_real_spectrum(spectra))),
        "max_abs_eig": float(np.max(np.abs(spectra))),
        "min_gap": float(np.min(point_min_gap)),
        "close_counts": {eps: int(np.sum(point_min_gap < eps)) for eps in thresholds},
    }


class Closure(ABC):
    """A rule producing closure weights (and spectra) at a batch of points

    Points are rows of an array of shape (P, N+1). ``source`` records how the
    closure was specified ("pn" or a model path) so runs can be reproduced.
    """

    tag = "closure"

    def __init__(self, order: int):
        if order < 1:
            raise UnsupportedOrderError(f"closure order must be >= 1, got {order}")
        self.order = order
        self.source = self.tag

    @property
    def state_independent(self) -> bool:
        return False

    @abstractmethod
    def evaluate(self, points: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Return (weights (P, N+1), spectra (P, N+1) or None)"""

    def _check(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.order + 1:
            raise DimensionError(
                f"{self.tag} closure of order {self.order} got {points.shape[-1]} moments"
            )
        return points


class PNClosure(Closure):
    """Classical P_N closure (m_{N+1} = 0)"""

    tag = "pn"

    def __init__(self, order: int):
        super().__init__(order)
        self._spectrum = closure_spectrum(np.zeros(order + 1))

    @property
    def state_independent(self) -> bool:
        return True

    def evaluate(self, points):
        points = self._check(points)
        weights = pn_closure(points)
        spectra = np.broadcast_to(self._spectrum, points.shape[:-1] + (self.order + 1,))
        return weights, spectra


class FixedWeightsClosure(Closure):
    """State-independent closure with prescribed weights"""

    tag = "fixed"

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=float)
        super().__init__(_order_of(weights))
        self.weights = weights
        self._spectrum = closure_spectrum(weights)

    @property
    def state_independent(self) -> bool:
        return True

    def evaluate(self, points):
        points = self._check(points)
        shape = points.shape[:-1] + (self.order + 1,)
        return (np.broadcast_to(self.weights, shape).copy(),
                np.broadcast_to(self._spectrum, shape))


class MLClosure(Closure):
    """Closure from a trained structure-preserving network"""

    def __init__(self, model):
        super().__init__(model.order)
        self.model = model
        self.tag = f"ml-{model.head}"
        self.source = self.tag

    def evaluate(self, points):
        points = self._check(points)
        weights, r = self.model.closure_weights(points)
        if not np.all(np.isfinite(weights)):
            bad = int(np.argmax(~np.all(np.isfinite(weights), axis=-1)))
            raise NumericError(f"non-finite closure weights at point {bad}")
        return weights, np.sort(r, axis=-1).astype(complex)


def pn_nodes(N: int) -> np.ndarray:
    """Roots of P_{N+1}, the spectrum of the P_N closure matrix"""
    return np.asarray(gauss_legendre(N + 1).nodes)
