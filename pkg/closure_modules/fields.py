"""
Grid fields shared by the kinetic and moment solvers

All fields live on the periodic unit interval with cell-centred points
x_j = (j + 1/2)/Nx.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError

logger = logging.getLogger(__name__)


def grid_points(nx: int) -> np.ndarray:
    """Cell centres of the periodic unit grid"""
    if nx < 5:
        raise DimensionError(f"WENO5 needs at least 5 grid points, got {nx}")
    return (np.arange(nx) + 0.5) / nx


@dataclass
class MediumCoeffs:
    """Scattering and absorption coefficients per grid point"""
    sigma_s: np.ndarray
    sigma_a: np.ndarray

    def __post_init__(self):
        self.sigma_s = np.asarray(self.sigma_s, dtype=float)
        self.sigma_a = np.asarray(self.sigma_a, dtype=float)
        if self.sigma_s.shape != self.sigma_a.shape or self.sigma_s.ndim != 1:
            raise DimensionError("sigma_s and sigma_a must be 1-d arrays of equal length")
        if np.any(self.sigma_s < 0) or np.any(self.sigma_a < 0):
            raise ValueError("cross sections must be nonnegative")

    @property
    def nx(self) -> int:
        return len(self.sigma_s)

    @classmethod
    def constant(cls, nx: int, sigma_s: float, sigma_a: float) -> "MediumCoeffs":
        return cls(np.full(nx, float(sigma_s)), np.full(nx, float(sigma_a)))

    @classmethod
    def from_functions(cls, nx: int, sigma_s: Callable, sigma_a: Callable) -> "MediumCoeffs":
        x = grid_points(nx)
        return cls(np.broadcast_to(sigma_s(x), x.shape).copy(),
                   np.broadcast_to(sigma_a(x), x.shape).copy())

    def source_diagonal(self, order: int) -> np.ndarray:
        """Diagonal of S_U per grid point, shape (N+1, Nx)"""
        d = np.empty((order + 1, self.nx))
        d[0] = -self.sigma_a
        d[1:] = -(self.sigma_s + self.sigma_a)
        return d


@dataclass
class KineticField:
    """Intensity f(x_j, v_q), shape (n_v, Nx), at the quadrature ordinates"""
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DimensionError(f"kinetic field must be (n_v, Nx), got {self.values.shape}")

    @property
    def nv(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def x(self) -> np.ndarray:
        return grid_points(self.nx)


@dataclass
class MomentField:
    """Moments m_0..m_N, shape (N+1, Nx)"""
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] < 2:
            raise DimensionError(f"moment field must be (N+1, Nx) with N >= 1, got {self.values.shape}")

    @property
    def order(self) -> int:
        return self.values.shape[0] - 1

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def x(self) -> np.ndarray:
        return grid_points(self.nx)

    def truncate(self, order: int) -> "MomentField":
        if order > self.order:
            raise DimensionError(f"field has order {self.order}, cannot keep {order}")
        return MomentField(self.values[:order + 1].copy(), self.t)

    def check_realizability(self, tol: float = 1e-10) -> bool:
        """Warn when m_0 <= 0 or |m_1| > m_0 anywhere"""
        m0, m1 = self.values[0], self.values[1]
        bad = (m0 <= 0) | (np.abs(m1) > m0 + tol)
        if np.any(bad):
            logger.warning(f"realizability violated at {int(np.sum(bad))} grid points (t={self.t:.4f})")
            return False
        return True

