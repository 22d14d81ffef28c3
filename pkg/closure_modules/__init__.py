"""
Hyperbolic Closure Modules

Structure-preserving moment closures for slab-geometry radiative transfer:
polynomial and eigenvalue kernels, closure maps, network training, the
kinetic reference solver, the closed moment solver and benchmark tooling.
"""

__version__ = "1.0.0"

# Core modules
from .errors import ClosureError, BlowUpError, UsageError
from .fields import KineticField, MediumCoeffs, MomentField
from .closure import (
    Closure,
    FixedWeightsClosure,
    MLClosure,
    PNClosure,
    hyperbolicity_check,
    linear_stability_scan,
)
from .nn import MlpModel, TrainConfig, load_model, save_model, train
from .kinetic import KineticConfig, kinetic_solve, extract_moments
from .momsolver import SolverConfig, solve
from .bench import BenchConfig, run_benchmark
from .config import ProjectConfig, load_config
from .slurm_job_manager import SlurmJobManager

__all__ = [
    'ClosureError',
    'BlowUpError',
    'UsageError',
    'KineticField',
    'MediumCoeffs',
    'MomentField',
    'Closure',
    'FixedWeightsClosure',
    'MLClosure',
    'PNClosure',
    'hyperbolicity_check',
    'linear_stability_scan',
    'MlpModel',
    'TrainConfig',
    'load_model',
    'save_model',
    'train',
    'KineticConfig',
    'kinetic_solve',
    'extract_moments',
    'SolverConfig',
    'solve',
    'BenchConfig',
    'run_benchmark',
    'ProjectConfig',
    'load_config',
    'SlurmJobManager',
]
