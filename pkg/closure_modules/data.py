"""
Scenarios, training data and benchmark initial conditions

Training scenarios are isotropic truncated Fourier series in x with
spatially constant cross sections. Each scenario is solved with the kinetic
reference solver; moments up to N+1 and their 4th-order central differences
are written one CSV per scenario, indexed by a JSON manifest.

Benchmarks:
    constant      fixed Fourier initial data, sigma_s = sigma_a = 1
    gaussian      Gaussian source c1/sqrt(2 pi theta) exp(-(x-x0)^2/(2 theta)) + c2, sigma_s = 1
    two-material  same Gaussian, sigma_s = 1 on (0.3, 0.7) and 10 elsewhere, sigma_a = 0
"""

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ClosureError, IntegrityError, UsageError
from .fields import KineticField, MediumCoeffs, MomentField, grid_points
from .kinetic import KineticConfig, extract_moments, isotropic_field, kinetic_solve, spatial_derivative
from .nn import TrainingSamples
from .polyalg import gauss_legendre, legendre_eval

logger = logging.getLogger(__name__)

DATASET_FORMAT_VERSION = 1

FOURIER_MODES = 3
DENSITY_FLOOR = 1e-4
SAMPLE_TIMES = tuple(round(0.05 * k, 10) for k in range(1, 21))

GAUSSIAN_SOURCE = {"c1": 0.5, "c2": 2.5, "x0": 0.5, "theta": 0.01}
TWO_MATERIAL = {"x1": 0.3, "x2": 0.7, "sigma_s_inside": 1.0, "sigma_s_outside": 10.0}
CONSTANT_FOURIER = {"a0": 2.0, "a": [0.5, 0.25, 0.1], "b": [0.3, -0.2, 0.1]}

# report times per benchmark
BENCHMARKS: Dict[str, Tuple[float, ...]] = {
    "constant": (0.5, 1.0),
    "gaussian": (1.0,),
    "two-material": (0.5, 1.0, 2.0),
}


@dataclass
class Scenario:
    """One initial condition plus medium

    ``ic`` holds a family tag and its parameters:
        {"family": "fourier", "a0": .., "a": [..], "b": [..]}
        {"family": "gaussian", "c1": .., "c2": .., "x0": .., "theta": ..}
        {"family": "mode", "a0": .., "k": .., "amplitude": ..}  (a0 + sin 2 pi x)(1 + amplitude P_k(v))
    """
    id: int
    ic: Dict
    sigma_s: float
    sigma_a: float
    t_end: float = 1.0
    sample_times: Tuple[float, ...] = SAMPLE_TIMES

    def __post_init__(self):
        self.sample_times = tuple(float(t) for t in self.sample_times)
        if self.sigma_s < 0 or self.sigma_a < 0:
            raise UsageError(f"scenario {self.id}: cross sections must be nonnegative")
        if self.ic.get("family") not in ("fourier", "gaussian", "mode"):
            raise UsageError(f"scenario {self.id}: unknown initial-data family {self.ic.get('family')}")

    def to_dict(self) -> Dict:
        record = asdict(self)
        record["sample_times"] = list(self.sample_times)
        return record

    @classmethod
    def from_dict(cls, record: Dict) -> "Scenario":
        return cls(int(record["id"]), dict(record["ic"]), float(record["sigma_s"]),
                   float(record["sigma_a"]), float(record["t_end"]),
                   tuple(record["sample_times"]))

    def medium(self, nx: int) -> MediumCoeffs:
        return MediumCoeffs.constant(nx, self.sigma_s, self.sigma_a)

    def initial_field(self, nx: int, n_v: int) -> KineticField:
        return initial_field(self.ic, nx, n_v)


def fourier_profile(x, a0: float, a: Sequence[float], b: Sequence[float],
                    floor: float = DENSITY_FLOOR) -> np.ndarray:
    """max(floor, a0 + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x))"""
    x = np.asarray(x, dtype=float)
    profile = np.full_like(x, a0)
    for k, (ak, bk) in enumerate(zip(a, b), start=1):
        profile += ak * np.cos(2 * np.pi * k * x) + bk * np.sin(2 * np.pi * k * x)
    return np.maximum(floor, profile)


def gaussian_profile(x, c1: float = 0.5, c2: float = 2.5, x0: float = 0.5,
                     theta: float = 0.01) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return c1 / math.sqrt(2 * math.pi * theta) * np.exp(-(x - x0) ** 2 / (2 * theta)) + c2


def initial_field(ic: Dict, nx: int, n_v: int) -> KineticField:
    """Kinetic initial data of one family on an Nx grid with n_v ordinates"""
    x = grid_points(nx)
    params = {k: v for k, v in ic.items() if k != "family"}
    family = ic.get("family")
    if family == "fourier":
        return isotropic_field(fourier_profile(x, **params), n_v)
    if family == "gaussian":
        return isotropic_field(gaussian_profile(x, **params), n_v)
    if family == "mode":
        v = gauss_legendre(n_v).nodes
        profile = params["a0"] + np.sin(2 * np.pi * x)
        angular = 1.0 + params["amplitude"] * legendre_eval(int(params["k"]), v)
        return KineticField(np.outer(angular, profile))
    raise UsageError(f"unknown initial-data family '{family}'")


def sample_scenarios(seed: int, count: int, t_end: float = 1.0,
                     sample_times: Sequence[float] = SAMPLE_TIMES) -> List[Scenario]:
    """Random training scenarios

    a_0 ~ U[1, 3], a_k, b_k ~ U[-1, 1] (k = 1..3), sigma_s log-uniform on
    [0.1, 100], sigma_a = 0 with probability 1/2 and log-uniform on [0.1, 10]
    otherwise.
    """
    if count < 1:
        raise UsageError("scenario count must be >= 1")
    rng = np.random.default_rng(seed)
    scenarios = []
    for i in range(count):
        a0 = float(rng.uniform(1.0, 3.0))
        a = rng.uniform(-1.0, 1.0, FOURIER_MODES).tolist()
        b = rng.uniform(-1.0, 1.0, FOURIER_MODES).tolist()
        sigma_s = float(10.0 ** rng.uniform(-1.0, 2.0))
        absorbing = rng.random() >= 0.5
        sigma_a_draw = float(10.0 ** rng.uniform(-1.0, 1.0))
        sigma_a = sigma_a_draw if absorbing else 0.0
        scenarios.append(Scenario(i, {"family": "fourier", "a0": a0, "a": a, "b": b},
                                  sigma_s, sigma_a, t_end, tuple(sample_times)))
    return scenarios


@dataclass
class BenchmarkCase:
    """Initial data, medium and report times of a named benchmark"""
    name: str
    ic: KineticField
    medium: MediumCoeffs
    report_times: Tuple[float, ...]

    def moments(self, order: int) -> MomentField:
        return extract_moments(self.ic, order)


def benchmark_ic(name: str, nx: int = 256, n_v: int = 64,
                 sigma_s: Optional[float] = None) -> BenchmarkCase:
    """Named benchmark on an Nx grid

    Args:
        name: constant, gaussian or two-material
        nx, n_v: grid and ordinate counts
        sigma_s: override of the constant benchmark's scattering coefficient

    Raises:
        UsageError: unknown name
    """
    if name not in BENCHMARKS:
        raise UsageError(f"unknown benchmark '{name}', expected one of {sorted(BENCHMARKS)}")
    x = grid_points(nx)
    if name == "constant":
        ic = initial_field({"family": "fourier", **CONSTANT_FOURIER}, nx, n_v)
        medium = MediumCoeffs.constant(nx, 1.0 if sigma_s is None else sigma_s, 1.0)
    elif name == "gaussian":
        ic = isotropic_field(gaussian_profile(x, **GAUSSIAN_SOURCE), n_v)
        medium = MediumCoeffs.constant(nx, 1.0, 0.0)
    else:
        ic = isotropic_field(gaussian_profile(x, **GAUSSIAN_SOURCE), n_v)
        inside = (x > TWO_MATERIAL["x1"]) & (x < TWO_MATERIAL["x2"])
        sigma = np.where(inside, TWO_MATERIAL["sigma_s_inside"], TWO_MATERIAL["sigma_s_outside"])
        medium = MediumCoeffs(sigma, np.zeros(nx))
    return BenchmarkCase(name, ic, medium, BENCHMARKS[name])


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------

def dataset_columns(order: int) -> List[str]:
    return (["x", "t"] + [f"m{k}" for k in range(order + 1)]
            + [f"dm{k}" for k in range(order + 2)])


def training_rows(snapshot: KineticField, order: int) -> np.ndarray:
    """(Nx, columns) rows of one snapshot: x, t, m_0..m_N, dm_0..dm_{N+1}"""
    moments = extract_moments(snapshot, order + 1)
    moments.check_realizability()
    derivatives = spatial_derivative(moments.values, snapshot.dx)
    nx = snapshot.nx
    return np.column_stack([snapshot.x, np.full(nx, snapshot.t),
                            moments.values[:order + 1].T, derivatives.T])


@dataclass
class DatasetFile:
    name: str
    scenario: int
    rows: int
    sha256: str


@dataclass
class DatasetManifest:
    """Index of a generated dataset"""
    order: int
    nx: int
    nv: int
    seed: int
    scenarios: List[Dict] = field(default_factory=list)
    files: List[DatasetFile] = field(default_factory=list)
    failures: List[Dict] = field(default_factory=list)
    version: int = DATASET_FORMAT_VERSION

    def to_dict(self) -> Dict:
        return {
            "version": self.version,
            "N": self.order,
            "Nx": self.nx,
            "nv": self.nv,
            "seed": self.seed,
            "scenarios": self.scenarios,
            "files": [asdict(f) for f in self.files],
            "failures": self.failures,
        }

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path: Path) -> "DatasetManifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
            if data["version"] != DATASET_FORMAT_VERSION:
                raise IntegrityError(f"unsupported dataset version {data['version']}")
            return cls(int(data["N"]), int(data["Nx"]), int(data["nv"]), int(data["seed"]),
                       list(data["scenarios"]), [DatasetFile(**f) for f in data["files"]],
                       list(data.get("failures", [])))
        except (KeyError, TypeError, json.JSONDecodeError) as e:
            raise IntegrityError(f"cannot read manifest {path}: {e}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_csv(path: Path, rows: np.ndarray, columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as f:
        np.savetxt(f, rows, fmt="%.17g", delimiter=",", header=",".join(columns), comments="")


def _generate_one(scenario: Scenario, order: int, nx: int, config: KineticConfig,
                  out_dir: Path) -> Tuple[Optional[DatasetFile], Optional[Dict]]:
    ic = scenario.initial_field(nx, config.n_v)
    try:
        solution = kinetic_solve(ic, scenario.medium(nx), scenario.t_end,
                                 scenario.sample_times, config)
    except ClosureError as e:
        logger.warning(f"scenario {scenario.id} failed: {e}")
        return None, {"scenario": scenario.id, "error": str(e)}
    rows = np.vstack([training_rows(solution.at(t), order) for t in scenario.sample_times])
    name = f"scenario_{scenario.id:04d}.csv"
    path = out_dir / name
    _write_csv(path, rows, dataset_columns(order))
    logger.info(f"scenario {scenario.id}: {len(rows)} rows -> {path}")
    return DatasetFile(name, scenario.id, len(rows), _sha256(path)), None


def _mpi_comm(use_mpi: bool):
    if not use_mpi:
        return None
    try:
        from mpi4py import MPI
    except ImportError:
        logger.warning("mpi4py is not installed; generating scenarios serially")
        return None
    return MPI.COMM_WORLD


def generate_dataset(scenarios: Sequence[Scenario], order: int, out_dir, nx: int = 256,
                     config: Optional[KineticConfig] = None, seed: int = 0,
                     use_mpi: bool = False) -> DatasetManifest:
    """Solve every scenario and write its training rows

    With ``use_mpi`` scenarios are distributed round-robin over the ranks of
    COMM_WORLD; rank 0 collects the file entries and writes manifest.json.

    Args:
        scenarios: scenarios to solve
        order: closure order N (moments up to N+1 are extracted)
        out_dir: output directory
        nx: grid size
        config: kinetic solver settings
        seed: recorded in the manifest
        use_mpi: distribute over MPI ranks when mpi4py is available

    Returns:
        DatasetManifest (on every rank)
    """
    if not scenarios:
        raise UsageError("no scenarios to generate")
    config = config or KineticConfig()
    if order + 1 >= config.n_v:
        raise UsageError(f"order {order} needs more than {config.n_v} ordinates")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    comm = _mpi_comm(use_mpi)
    rank, size = (comm.Get_rank(), comm.Get_size()) if comm is not None else (0, 1)

    files, failures = [], []
    for scenario in scenarios[rank::size]:
        entry, failure = _generate_one(scenario, order, nx, config, out_dir)
        if entry is not None:
            files.append(entry)
        if failure is not None:
            failures.append(failure)

    if comm is not None and size > 1:
        if rank == 0:
            for source in range(1, size):
                more_files, more_failures = comm.recv(source=source, tag=11)
                files.extend(more_files)
                failures.extend(more_failures)
        else:
            comm.send((files, failures), dest=0, tag=11)

    manifest = DatasetManifest(order, nx, config.n_v, seed,
                               [s.to_dict() for s in scenarios],
                               sorted(files, key=lambda f: f.scenario),
                               sorted(failures, key=lambda f: f["scenario"]))
    if rank == 0:
        manifest.write(out_dir / "manifest.json")
        logger.info(f"dataset written: {len(manifest.files)} scenarios, "
                    f"{len(manifest.failures)} failures -> {out_dir}")
    if comm is not None and size > 1:
        manifest = comm.bcast(manifest, root=0)
    return manifest


@dataclass
class DatasetSplit:
    train: TrainingSamples
    validation: TrainingSamples
    train_scenarios: List[int]
    validation_scenarios: List[int]


def _load_file(base: Path, entry: DatasetFile, order: int) -> np.ndarray:
    path = base / entry.name
    if not path.exists():
        raise IntegrityError(f"dataset file {path} is missing")
    if _sha256(path) != entry.sha256:
        raise IntegrityError(f"checksum mismatch for {path}")
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape != (entry.rows, len(dataset_columns(order))):
        raise IntegrityError(f"{path}: expected {entry.rows} rows, found {rows.shape[0]}")
    return rows


def _samples(rows: List[np.ndarray], ids: List[int], order: int) -> TrainingSamples:
    n = order + 1
    if rows:
        table = np.vstack(rows)
        scenario = np.concatenate([np.full(len(r), i) for r, i in zip(rows, ids)])
    else:
        table = np.zeros((0, 2 + 2 * n + 1))
        scenario = np.zeros(0, dtype=int)
    return TrainingSamples(table[:, 2:2 + n], table[:, 2 + n:2 + 2 * n], table[:, 2 + 2 * n],
                           scenario)


def load_dataset(manifest_path, validation_fraction: float = 0.1,
                 seed: int = 0) -> DatasetSplit:
    """Scenario-level train/validation split of a generated dataset

    Raises:
        IntegrityError: missing file, checksum or row-count mismatch
        UsageError: dataset without any successful scenario
    """
    if not 0.0 <= validation_fraction < 1.0:
        raise UsageError("validation fraction must lie in [0, 1)")
    manifest_path = Path(manifest_path)
    manifest = DatasetManifest.read(manifest_path)
    if not manifest.files:
        raise UsageError(f"dataset {manifest_path} holds no scenarios")
    base = manifest_path.parent
    tables = {entry.scenario: _load_file(base, entry, manifest.order) for entry in manifest.files}

    ids = sorted(tables)
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    n_val = int(round(validation_fraction * len(ids)))
    if validation_fraction > 0 and len(ids) > 1:
        n_val = min(max(n_val, 1), len(ids) - 1)
    val_ids = sorted(order[:n_val])
    train_ids = sorted(order[n_val:])
    return DatasetSplit(
        _samples([tables[i] for i in train_ids], train_ids, manifest.order),
        _samples([tables[i] for i in val_ids], val_ids, manifest.order),
        train_ids, val_ids,
    )
