"""
Centralized configuration for closure_modules

ClosureDefaults keeps the numerical constants in one place; load_config
reads closure_config.yaml into typed sections. Every key in the file must
name a field of its section.
"""

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Optional

import yaml

from .closure import DEFAULT_THRESHOLDS, UNSTABLE_TOL
from .errors import UsageError
from .kinetic import KineticConfig
from .linalg import DEFLATION_TOL
from .momsolver import SolverConfig
from .nn import TrainConfig
from .polyalg import MAX_DEGREE

logger = logging.getLogger(__name__)


class ClosureDefaults:
    """Centralized numerical defaults"""

    # Linear algebra
    DEFLATION_TOL = DEFLATION_TOL
    MAX_DEGREE = MAX_DEGREE

    # Diagnostics
    THRESHOLDS = DEFAULT_THRESHOLDS
    UNSTABLE_TOL = UNSTABLE_TOL
    XI_RANGE = (-100, 100)

    # Discretization
    NX = 256
    N_V = 64
    CFL = 0.8

    # Network
    GAMMA = 0.1
    HIDDEN_LAYERS = 6
    HIDDEN_WIDTH = 64
    ACTIVATION = "relu"
    HEAD = "bound"

    CONFIG_FILE = Path(__file__).resolve().parent.parent / "closure_config.yaml"


@dataclass
class ModelConfig:
    """Network architecture"""
    head: str = ClosureDefaults.HEAD
    layers: int = ClosureDefaults.HIDDEN_LAYERS
    width: int = ClosureDefaults.HIDDEN_WIDTH
    activation: str = ClosureDefaults.ACTIVATION
    gamma: float = ClosureDefaults.GAMMA
    standardize: bool = False


@dataclass
class DataConfig:
    """Training-data generation and splitting"""
    seed: int = 0
    count: int = 100
    order: int = 6
    nx: int = ClosureDefaults.NX
    validation_fraction: float = 0.1
    out_dir: str = "data"
    use_mpi: bool = False


@dataclass
class SlurmConfig:
    """Batch-script settings for cluster sweeps"""
    partition: str = "all"
    time_limit: str = "04:00:00"
    cpus_per_task: int = 4
    python: str = "python3"
    jobs_dir: str = "slurm_jobs"
    results_dir: str = "slurm_results"
    poll_interval: float = 30.0
    wait_timeout: float = 86400.0


@dataclass
class ProjectConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    kinetic: KineticConfig = field(default_factory=KineticConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    slurm: SlurmConfig = field(default_factory=SlurmConfig)


_SECTIONS = {f.name: f for f in fields(ProjectConfig)}
_SECTION_TYPES = {
    "solver": SolverConfig,
    "kinetic": KineticConfig,
    "train": TrainConfig,
    "model": ModelConfig,
    "data": DataConfig,
    "slurm": SlurmConfig,
}


def _build_section(name: str, values: Optional[Dict]):
    cls = _SECTION_TYPES[name]
    values = values or {}
    if not isinstance(values, dict):
        raise UsageError(f"config section '{name}' must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown key(s) in config section '{name}': {', '.join(unknown)}")
    return cls(**values)


def load_config(path: Optional[Path] = None) -> ProjectConfig:
    """Load the YAML configuration

    Args:
        path: YAML file; defaults to closure_config.yaml next to the package
            (built-in defaults when that file is absent)

    Returns:
        ProjectConfig

    Raises:
        UsageError: unreadable file, unknown section or key
    """
    if path is None:
        path = ClosureDefaults.CONFIG_FILE
        if not path.exists():
            return ProjectConfig()
    path = Path(path)
    try:
        with open(path, 'r') as f:
            raw = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise UsageError(f"cannot read configuration {path}: {e}")
    if not isinstance(raw, dict):
        raise UsageError(f"configuration {path} must be a mapping of sections")
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise UsageError(f"unknown config section(s): {', '.join(unknown)}")
    logger.debug(f"configuration loaded from {path}")
    return ProjectConfig(**{name: _build_section(name, raw.get(name)) for name in _SECTIONS})
