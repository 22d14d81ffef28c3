"""
Discrete-ordinates reference solver for the slab radiative transfer equation

    f_t + v f_x = sigma_s (1/2 int f dv - f) - sigma_a f     on [0, 1] periodic

Ordinates and weights are Gauss-Legendre (n_v = 64 by default), transport is
WENO5 upwind per ordinate, time stepping is SSP-RK3 with
dt = cfl * dx / max|v_q|.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import BlowUpError, NumericError, QuadratureExactnessError, UsageError
from .fields import KineticField, MediumCoeffs, MomentField
from .polyalg import Quadrature, gauss_legendre, legendre_table
from .stencils import WENO_VARIANTS, central_difference4, ssp_rk3_step, weno5_upwind_derivative

logger = logging.getLogger(__name__)


@dataclass
class KineticConfig:
    """Discretization parameters of the reference solver"""
    n_v: int = 64
    cfl: float = 0.8
    weno_variant: str = "z"
    negativity_tol: float = 1e-12
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.n_v < 2 or self.cfl <= 0 or self.max_steps <= 0:
            raise UsageError(f"invalid kinetic configuration: {self}")
        if self.weno_variant not in WENO_VARIANTS:
            raise UsageError(f"unknown WENO variant '{self.weno_variant}'")


@dataclass
class KineticSolution:
    """Snapshots at the requested times plus a (t, max f) history"""
    snapshots: List[KineticField]
    history: List[Tuple[float, float]] = field(default_factory=list)
    steps: int = 0

    @property
    def times(self) -> List[float]:
        return [s.t for s in self.snapshots]

    def at(self, t: float) -> KineticField:
        for snap in self.snapshots:
            if abs(snap.t - t) <= 1e-12 * max(1.0, abs(t)):
                return snap
        raise KeyError(f"no snapshot at t={t}")


def isotropic_field(profile, n_v: int) -> KineticField:
    """Same x-profile on every ordinate"""
    profile = np.asarray(profile, dtype=float)
    return KineticField(np.tile(profile, (n_v, 1)))


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, KineticField) else np.asarray(f, dtype=float)


def kinetic_rhs(f, med: MediumCoeffs, variant: str = "z") -> np.ndarray:
    """Tendency -v f_x + sigma_s (rho - f) - sigma_a f on every ordinate

    Args:
        f: KineticField or (n_v, Nx) array
        med: coefficients on the same grid
        variant: WENO weights

    Returns:
        (n_v, Nx) tendency
    """
    values = _values(f)
    n_v, nx = values.shape
    if med.nx != nx:
        raise UsageError(f"medium has {med.nx} points, field has {nx}")
    quad = gauss_legendre(n_v)
    v = quad.nodes
    dx = 1.0 / nx

    derivative = np.zeros_like(values)
    right = v > 0
    left = v < 0
    derivative[right] = weno5_upwind_derivative(values[right], dx, 1, variant)
    derivative[left] = weno5_upwind_derivative(values[left], dx, -1, variant)

    rho = 0.5 * (quad.weights @ values)
    return -v[:, None] * derivative + med.sigma_s * (rho - values) - med.sigma_a * values


def _first_bad_column(values: np.ndarray) -> int:
    bad = ~np.all(np.isfinite(values), axis=0)
    return int(np.argmax(bad)) if np.any(bad) else -1


def kinetic_solve(ic: KineticField, med: MediumCoeffs, t_end: float,
                  snapshot_times: Sequence[float] = (),
                  config: Optional[KineticConfig] = None) -> KineticSolution:
    """Integrate from ic.t to t_end, storing snapshots at the requested times

    Every requested time (and t_end) is hit exactly by shortening the last
    step before it.

    Raises:
        BlowUpError: non-finite intensity (time, grid column, history)
        NumericError: intensity below -negativity_tol
    """
    config = config or KineticConfig(n_v=ic.nv)
    if t_end <= ic.t:
        raise UsageError(f"t_end={t_end} must exceed the initial time {ic.t}")
    if any(t < ic.t or t > t_end for t in snapshot_times):
        raise UsageError(f"snapshot times must lie in [{ic.t}, {t_end}]")
    quad = gauss_legendre(ic.nv)
    dt_max = config.cfl * ic.dx / float(np.max(np.abs(quad.nodes)))
    targets = sorted(set(float(t) for t in snapshot_times) | {float(t_end)})

    def rhs(u):
        return kinetic_rhs(u, med, config.weno_variant)

    values = ic.values.copy()
    t = ic.t
    steps = 0
    history = [(t, float(np.max(np.abs(values))))]
    snapshots = []
    logger.info(f"kinetic solve: n_v={ic.nv} Nx={ic.nx} t_end={t_end} dt={dt_max:.3e}")
    for target in targets:
        while t < target:
            dt = min(dt_max, target - t)
            values = ssp_rk3_step(rhs, values, dt)
            t = target if dt == target - t else t + dt
            steps += 1
            peak = float(np.max(np.abs(values)))
            history.append((t, peak))
            col = _first_bad_column(values)
            if col >= 0:
                raise BlowUpError(f"kinetic solution became non-finite at t={t:.6f}, grid point {col}",
                                  time=t, location=col, history=history)
            low = float(np.min(values))
            if low < -config.negativity_tol:
                raise NumericError(f"negative intensity {low:.3e} at t={t:.6f}")
            if steps >= config.max_steps:
                raise UsageError(f"kinetic solve exceeded {config.max_steps} steps")
        snapshots.append(KineticField(values.copy(), target))
    logger.debug(f"kinetic solve finished after {steps} steps")
    return KineticSolution(snapshots, history, steps)


def extract_moments(f: KineticField, order: int) -> MomentField:
    """m_k(x_j) = 1/2 sum_q w_q P_k(v_q) f(x_j, v_q) for k = 0..order

    Raises:
        QuadratureExactnessError: order >= n_v
    """
    if order >= f.nv:
        raise QuadratureExactnessError(
            f"moment order {order} needs more than the {f.nv} ordinates available")
    quad: Quadrature = gauss_legendre(f.nv)
    table = legendre_table(order, quad.nodes)
    return MomentField(0.5 * (table * quad.weights) @ f.values, f.t)


def spatial_derivative(values, dx: Optional[float] = None) -> np.ndarray:
    """4th-order central difference along the periodic grid (last axis)"""
    values = np.asarray(values, dtype=float)
    if dx is None:
        dx = 1.0 / values.shape[-1]
    return central_difference4(values, dx)


def total_mass(f) -> float:
    """Particle number sum_j m_0(x_j) dx"""
    values = _values(f)
    quad = gauss_legendre(values.shape[0])
    return float(0.5 * np.sum(quad.weights @ values) / values.shape[1])
