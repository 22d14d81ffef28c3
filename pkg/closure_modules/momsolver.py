"""
Solver for the closed moment system m_t + A(m) m_x = S m

WENO5 with global Lax-Friedrichs splitting in space (frozen-coefficient flux
per grid point), SSP-RK3 in time, dt = cfl * dx / c with c the largest
eigenvalue magnitude over the grid. A diagnostics record is appended every
step; the linear-stability scan of i xi A + S_U runs every
``stability_every`` steps.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .closure import (
    DEFAULT_THRESHOLDS,
    UNSTABLE_TOL,
    Closure,
    grid_spectrum_summary,
    weights_to_matrix,
)
from .errors import BlowUpError, DegenerateInputError, DimensionError, NumericError, UsageError
from .fields import MediumCoeffs, MomentField
from .linalg import eigenvalues_batched, max_real_part_shifted_batched
from .stencils import WENO_VARIANTS, frozen_flux_derivative, ssp_rk3_step

logger = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    """Moment solver settings

    Attributes:
        cfl: Courant factor in dt = cfl * dx / c
        nx: grid size
        t_end: final time
        snapshot_times: extra times to store (t_end is always stored)
        thresholds: eigenvalue gap thresholds for the close counts
        xi_min, xi_max: integer wave-number range of the stability scan
        stability_every: scan cadence in steps (0 disables the scan)
        weno_variant: "z" or "js"
        max_steps: hard cap on the number of steps
    """
    cfl: float = 0.8
    nx: int = 256
    t_end: float = 1.0
    snapshot_times: Tuple[float, ...] = ()
    thresholds: Tuple[float, ...] = DEFAULT_THRESHOLDS
    xi_min: int = -100
    xi_max: int = 100
    stability_every: int = 10
    weno_variant: str = "z"
    max_steps: int = 1_000_000

    def __post_init__(self):
        self.snapshot_times = tuple(float(t) for t in self.snapshot_times)
        self.thresholds = tuple(float(e) for e in self.thresholds)
        if self.cfl <= 0 or self.nx < 5 or self.t_end <= 0 or self.max_steps <= 0:
            raise UsageError(f"invalid solver configuration: {self}")
        if self.stability_every < 0 or self.xi_min > self.xi_max:
            raise UsageError("stability scan settings are inconsistent")
        if any(e <= 0 for e in self.thresholds):
            raise UsageError("gap thresholds must be positive")
        if self.weno_variant not in WENO_VARIANTS:
            raise UsageError(f"unknown WENO variant '{self.weno_variant}'")


@dataclass
class DiagnosticsRecord:
    """Spectral diagnostics of one time step (taken at the start of the step)

    ``unstable_xi_count`` and ``unstable_points`` are -1 on steps without a scan.
    """
    step: int
    t: float
    max_abs_eig: float
    min_gap: float
    all_real: bool
    close_counts: Dict[float, int]
    unstable_xi_count: int
    unstable_points: int
    linf_m0: float


@dataclass
class Trajectory:
    snapshots: List[MomentField] = field(default_factory=list)

    @property
    def times(self) -> List[float]:
        return [s.t for s in self.snapshots]

    def at(self, t: float) -> MomentField:
        for snap in self.snapshots:
            if abs(snap.t - t) <= 1e-12 * max(1.0, abs(t)):
                return snap
        raise KeyError(f"no snapshot at t={t}")


@dataclass
class SolveResult:
    trajectory: Trajectory
    diagnostics: List[DiagnosticsRecord]
    steps: int
    max_speed: float

    @property
    def final(self) -> MomentField:
        return self.trajectory.snapshots[-1]


def cfl_dt(max_speed: float, dx: float, factor: float = 0.8) -> float:
    """factor * dx / c

    Raises:
        DegenerateInputError: c <= 0
    """
    if not max_speed > 0:
        raise DegenerateInputError(f"characteristic speed must be positive, got {max_speed}")
    return factor * dx / max_speed


@dataclass
class _Evaluation:
    """Closure output at every grid point"""
    matrices: np.ndarray
    spectra: np.ndarray
    max_speed: float


def _evaluate_closure(values: np.ndarray, closure: Closure) -> _Evaluation:
    points = values.T
    weights, spectra = closure.evaluate(points)
    if closure.state_independent:
        # one matrix serves the whole grid
        A = np.broadcast_to(weights_to_matrix(weights[0]), (len(points),) + (values.shape[0],) * 2)
    else:
        A = weights_to_matrix(weights)
    if spectra is None:
        spectra = eigenvalues_batched(A)
    return _Evaluation(A, np.asarray(spectra), float(np.max(np.abs(spectra))))


def _tendency(values: np.ndarray, evaluation: _Evaluation, med: MediumCoeffs,
              variant: str) -> np.ndarray:
    dx = 1.0 / values.shape[1]
    alpha = max(evaluation.max_speed, np.finfo(float).tiny)
    transport = frozen_flux_derivative(evaluation.matrices, values, alpha, dx, variant)
    return -transport + med.source_diagonal(values.shape[0] - 1) * values


def moment_rhs(m: MomentField, closure: Closure, med: MediumCoeffs,
               variant: str = "z") -> np.ndarray:
    """Tendency -A(m) m_x + S m, shape (N+1, Nx)

    Args:
        m: current moments
        closure: supplies the weights at every grid point
        med: coefficients on the same grid
        variant: WENO weights

    Raises:
        DimensionError: closure order or medium size disagrees with the field
        NumericError: non-finite closure output (raised by the closure)
    """
    _check_inputs(m, closure, med)
    return _tendency(m.values, _evaluate_closure(m.values, closure), med, variant)


def _check_inputs(m: MomentField, closure: Closure, med: MediumCoeffs) -> None:
    if closure.order != m.order:
        raise DimensionError(f"closure order {closure.order} differs from field order {m.order}")
    if med.nx != m.nx:
        raise DimensionError(f"medium has {med.nx} points, field has {m.nx}")


def _diagnose(step: int, t: float, values: np.ndarray, evaluation: _Evaluation,
              med: MediumCoeffs, config: SolverConfig, scan: bool) -> DiagnosticsRecord:
    summary = grid_spectrum_summary(evaluation.spectra, config.thresholds)
    unstable_xi, unstable_points = -1, -1
    if scan:
        xis = np.arange(config.xi_min, config.xi_max + 1, dtype=float)
        s_diag = med.source_diagonal(values.shape[0] - 1).T
        max_real = max_real_part_shifted_batched(evaluation.matrices, s_diag, xis)
        unstable = max_real > UNSTABLE_TOL
        unstable_xi = int(np.sum(np.any(unstable, axis=0)))
        unstable_points = int(np.sum(np.any(unstable, axis=1)))
    return DiagnosticsRecord(
        step=step,
        t=t,
        max_abs_eig=summary["max_abs_eig"],
        min_gap=summary["min_gap"],
        all_real=summary["all_real"],
        close_counts=summary["close_counts"],
        unstable_xi_count=unstable_xi,
        unstable_points=unstable_points,
        linf_m0=float(np.max(np.abs(values[0]))),
    )


def solve(ic: MomentField, closure: Closure, med: MediumCoeffs,
          config: Optional[SolverConfig] = None) -> SolveResult:
    """SSP-RK3 integration from ic.t to config.t_end

    Returns:
        SolveResult with snapshots at config.snapshot_times and t_end, and one
        diagnostics record per step

    Raises:
        BlowUpError: the state became non-finite; carries (t, L-inf m_0)
            history and the partial result
    """
    config = config or SolverConfig(nx=ic.nx)
    _check_inputs(ic, closure, med)
    if config.t_end <= ic.t:
        raise UsageError(f"t_end={config.t_end} must exceed the initial time {ic.t}")
    if any(t < ic.t or t > config.t_end for t in config.snapshot_times):
        raise UsageError(f"snapshot times must lie in [{ic.t}, {config.t_end}]")
    ic.check_realizability()
    targets = sorted(set(config.snapshot_times) | {config.t_end})

    values = ic.values.copy()
    t = ic.t
    step = 0
    max_speed = 0.0
    history = [(t, float(np.max(np.abs(values[0]))))]
    diagnostics: List[DiagnosticsRecord] = []
    trajectory = Trajectory()
    logger.info(f"moment solve: closure={closure.tag} N={ic.order} Nx={ic.nx} t_end={config.t_end}")

    def partial() -> SolveResult:
        return SolveResult(trajectory, diagnostics, step, max_speed)

    def rhs(u: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(u)):
            return np.full_like(u, np.nan)
        return _tendency(u, _evaluate_closure(u, closure), med, config.weno_variant)

    def blow_up(reason: str, col: int) -> BlowUpError:
        logger.warning(f"moment solve blew up at t={t:.5f}, grid point {col}: {reason}")
        return BlowUpError(f"moment solution {reason} at t={t:.6f}, grid point {col}",
                           time=t, location=col, history=history, partial=partial())

    for target in targets:
        while t < target:
            try:
                evaluation = _evaluate_closure(values, closure)
                scan = config.stability_every > 0 and step % config.stability_every == 0
                record = _diagnose(step, t, values, evaluation, med, config, scan)
                diagnostics.append(record)
                logger.debug(f"step {step}: t={t:.5f} max|eig|={record.max_abs_eig:.6f} "
                             f"min_gap={record.min_gap:.3e} real={record.all_real}")
                max_speed = max(max_speed, evaluation.max_speed)
                dt = min(cfl_dt(evaluation.max_speed, ic.dx, config.cfl), target - t)
                values = ssp_rk3_step(rhs, values, dt)
            except (NumericError, np.linalg.LinAlgError) as e:
                raise blow_up("lost finite closure output", -1) from e

            t = target if dt == target - t else t + dt
            step += 1
            history.append((t, float(np.max(np.abs(values[0])))))
            bad = ~np.all(np.isfinite(values), axis=0)
            if np.any(bad):
                raise blow_up("became non-finite", int(np.argmax(bad)))
            if step >= config.max_steps:
                raise UsageError(f"moment solve exceeded {config.max_steps} steps")
        trajectory.snapshots.append(MomentField(values.copy(), target))

    logger.info(f"moment solve finished: {step} steps, max speed {max_speed:.6f}")
    return partial()

