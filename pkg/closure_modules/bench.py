"""
Benchmark harness for moment closures

Runs the kinetic reference and the closed moment system on the same grid,
measures relative L2 errors of m_0 and m_1, and writes:

    report.json / report.md     run summary (markdown rendered with Jinja2)
    errors.csv                  t, err_m0, err_m1 at every stored time
    diagnostics.csv / .json     per-step spectral diagnostics
    solution_t<time>.csv        x, reference and closure m_0, m_1 at report times
    moments_final.csv           x, m_0..m_N of the last stored state

plus scattering sweeps, moment-count convergence tables and phase portraits.
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from jinja2 import Environment, FileSystemLoader

from .closure import Closure, MLClosure, PNClosure
from .data import BenchmarkCase, benchmark_ic
from .errors import BlowUpError, DegenerateInputError, DimensionError, UsageError
from .fields import MomentField
from .kinetic import KineticConfig, KineticSolution, extract_moments, kinetic_solve
from .momsolver import DiagnosticsRecord, SolveResult, SolverConfig, Trajectory, solve
from .nn import load_model

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).parent / "templates" / "reports"

# spacing of the error history between report times
HISTORY_SPACING = 0.1
# scattering coefficients of a sweep when none are given, log-spaced over the training range
DEFAULT_SIGMA_SWEEP = (0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0)


def relative_l2(a, b) -> float:
    """sqrt(sum (a - b)^2 / sum b^2); b is the reference

    Raises:
        DegenerateInputError: zero reference norm
        DimensionError: shapes differ
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shapes {a.shape} and {b.shape} differ")
    denom = float(np.sum(b * b))
    if denom == 0.0:
        raise DegenerateInputError("reference field has zero norm")
    return math.sqrt(float(np.sum((a - b) ** 2)) / denom)


def closure_from_spec(spec: str, order: int) -> Closure:
    """"pn" or a path to a model JSON file"""
    if spec == "pn":
        return PNClosure(order)
    model = load_model(spec)
    if model.order != order:
        raise UsageError(f"model {spec} has order {model.order}, benchmark asks for {order}")
    closure = MLClosure(model)
    closure.source = str(spec)
    return closure


@dataclass
class BenchConfig:
    """Discretization shared by the kinetic reference and the moment solve"""
    nx: int = 256
    n_v: int = 64
    cfl: float = 0.8
    weno_variant: str = "z"
    stability_every: int = 10
    t_end: Optional[float] = None
    sigma_s: Optional[float] = None

    def solver_config(self, t_end: float, times: Sequence[float]) -> SolverConfig:
        return SolverConfig(cfl=self.cfl, nx=self.nx, t_end=t_end, snapshot_times=tuple(times),
                            stability_every=self.stability_every, weno_variant=self.weno_variant)

    def kinetic_config(self) -> KineticConfig:
        return KineticConfig(n_v=self.n_v, cfl=self.cfl, weno_variant=self.weno_variant)


@dataclass
class ErrorRow:
    t: float
    err_m0: float
    err_m1: float


@dataclass
class RunReport:
    """Summary of one benchmark or solve run"""
    benchmark: str
    closure: str
    order: int
    nx: int
    t_end: float
    report_times: List[float]
    errors: List[ErrorRow] = field(default_factory=list)
    steps: int = 0
    max_abs_eig: float = 0.0
    all_real: bool = True
    max_close_counts: Dict[str, int] = field(default_factory=dict)
    max_unstable_xi: int = 0
    blowup_time: Optional[float] = None
    closure_source: str = ""
    sigma_s: Optional[float] = None
    files: Dict[str, str] = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.blowup_time is None

    def error_at(self, t: float) -> ErrorRow:
        for row in self.errors:
            if abs(row.t - t) <= 1e-12 * max(1.0, abs(t)):
                return row
        raise KeyError(f"no error recorded at t={t}")

    def to_dict(self) -> Dict:
        record = asdict(self)
        record["completed"] = self.completed
        return record

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _times(case: BenchmarkCase, t_end: float) -> List[float]:
    """Report times plus a regular history grid up to t_end"""
    history = [round(HISTORY_SPACING * k, 10) for k in range(1, int(round(t_end / HISTORY_SPACING)) + 1)]
    times = {t for t in case.report_times if t <= t_end} | {t for t in history if t <= t_end} | {t_end}
    return sorted(times)


def kinetic_reference(case: BenchmarkCase, times: Sequence[float],
                      config: BenchConfig) -> KineticSolution:
    return kinetic_solve(case.ic, case.medium, max(times), times, config.kinetic_config())


def _summarize(report: RunReport, diagnostics: List[DiagnosticsRecord]) -> None:
    if not diagnostics:
        return
    report.max_abs_eig = max(d.max_abs_eig for d in diagnostics)
    report.all_real = all(d.all_real for d in diagnostics)
    report.max_close_counts = {
        repr(eps): max(d.close_counts[eps] for d in diagnostics)
        for eps in diagnostics[0].close_counts
    }
    report.max_unstable_xi = max(d.unstable_xi_count for d in diagnostics)


def _run_moments(case: BenchmarkCase, closure: Closure, order: int, times: Sequence[float],
                 config: BenchConfig, report: RunReport) -> SolveResult:
    ic = case.moments(order)
    try:
        result = solve(ic, closure, case.medium, config.solver_config(max(times), times))
    except BlowUpError as e:
        logger.warning(f"{case.name} with {closure.tag} blew up at t={e.time:.4f}")
        report.blowup_time = e.time
        result = e.partial
    report.steps = result.steps
    _summarize(report, result.diagnostics)
    return result


def _safe_error(a, b) -> float:
    try:
        return relative_l2(a, b)
    except DegenerateInputError:
        return math.nan


def run_benchmark(name: str, closure: Closure, order: int,
                  config: Optional[BenchConfig] = None, out_dir=None,
                  reference: Optional[KineticSolution] = None) -> RunReport:
    """Kinetic reference against the closed moment system on one benchmark

    A blow-up of the moment solve is recorded in the report, not raised.

    Args:
        name: constant, gaussian or two-material
        closure: closure of order ``order``
        order: N
        config: discretization
        out_dir: where to write report files (nothing written when None)
        reference: precomputed kinetic solution covering the run's times

    Returns:
        RunReport
    """
    config = config or BenchConfig()
    case = benchmark_ic(name, config.nx, config.n_v, config.sigma_s)
    t_end = config.t_end or max(case.report_times)
    times = _times(case, t_end)
    report = RunReport(name, closure.tag, order, config.nx, t_end,
                       [t for t in case.report_times if t <= t_end])
    report.closure_source = closure.source
    report.sigma_s = config.sigma_s
    logger.info(f"benchmark {name}: closure={closure.tag} N={order} Nx={config.nx} t_end={t_end}")

    if reference is None:
        reference = kinetic_reference(case, times, config)
    result = _run_moments(case, closure, order, times, config, report)

    for snap in result.trajectory.snapshots:
        ref = extract_moments(reference.at(snap.t), 1).values
        report.errors.append(ErrorRow(snap.t, _safe_error(snap.values[0], ref[0]),
                                      _safe_error(snap.values[1], ref[1])))

    if out_dir is not None:
        write_run_files(report, result, Path(out_dir), reference)
    return report


def run_solve(name: str, closure: Closure, order: int,
              config: Optional[BenchConfig] = None, out_dir=None) -> RunReport:
    """Moment solve of a benchmark without the kinetic reference"""
    config = config or BenchConfig()
    case = benchmark_ic(name, config.nx, config.n_v, config.sigma_s)
    t_end = config.t_end or max(case.report_times)
    times = _times(case, t_end)
    report = RunReport(name, closure.tag, order, config.nx, t_end,
                       [t for t in case.report_times if t <= t_end])
    report.closure_source = closure.source
    report.sigma_s = config.sigma_s
    result = _run_moments(case, closure, order, times, config, report)
    if out_dir is not None:
        write_run_files(report, result, Path(out_dir))
    return report


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.17g}"


def diagnostics_report(records: Sequence[DiagnosticsRecord], out_dir) -> Tuple[Path, Path]:
    """Write diagnostics.csv and diagnostics.json

    Columns: step, t, max_abs_eig, min_gap, all_real, count_eps_<eps>...,
    unstable_xi_count, unstable_points, Linf_m0. Non-finite L-inf values are
    written as nan/inf and flagged in the JSON under ``nonfinite_steps``.

    Raises:
        UsageError: empty stream
    """
    if not records:
        raise UsageError("diagnostics stream is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    eps_list = list(records[0].close_counts)
    header = (["step", "t", "max_abs_eig", "min_gap", "all_real"]
              + [f"count_eps_{eps:g}" for eps in eps_list]
              + ["unstable_xi_count", "unstable_points", "Linf_m0"])
    csv_path = out_dir / "diagnostics.csv"
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for r in records:
            writer.writerow([r.step, _fmt(r.t), _fmt(r.max_abs_eig), _fmt(r.min_gap), int(r.all_real)]
                            + [r.close_counts[eps] for eps in eps_list]
                            + [r.unstable_xi_count, r.unstable_points, _fmt(r.linf_m0)])
    json_path = out_dir / "diagnostics.json"
    payload = {
        "columns": header,
        "records": [
            {**{k: v for k, v in asdict(r).items() if k != "close_counts"},
             "close_counts": {repr(k): v for k, v in r.close_counts.items()}}
            for r in records
        ],
        "nonfinite_steps": [r.step for r in records if not math.isfinite(r.linf_m0)],
    }
    json_path.write_text(json.dumps(payload, indent=1, allow_nan=True))
    return csv_path, json_path


def write_errors(errors: Sequence[ErrorRow], path: Path) -> Path:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["t", "err_m0", "err_m1"])
        for row in errors:
            writer.writerow([_fmt(row.t), _fmt(row.err_m0), _fmt(row.err_m1)])
    return path


def write_moments(field_: MomentField, path: Path) -> Path:
    columns = ["x"] + [f"m{k}" for k in range(field_.order + 1)]
    with open(path, "w", newline="") as f:
        np.savetxt(f, np.column_stack([field_.x, field_.values.T]), fmt="%.17g",
                   delimiter=",", header=",".join(columns), comments="")
    return path


def read_moments(path: Path) -> MomentField:
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return MomentField(table[:, 1:].T)


def render_markdown(report: RunReport, path: Path) -> Path:
    """Markdown summary from templates/reports/run_report.md.j2"""
    env = Environment(loader=FileSystemLoader(str(TEMPLATES_DIR)), trim_blocks=True, lstrip_blocks=True)
    text = env.get_template("run_report.md.j2").render(report=report)
    path.write_text(text)
    return path


def write_run_files(report: RunReport, result: SolveResult, out_dir: Path,
                    reference: Optional[KineticSolution] = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if result.diagnostics:
        csv_path, json_path = diagnostics_report(result.diagnostics, out_dir)
        report.files["diagnostics_csv"] = csv_path.name
        report.files["diagnostics_json"] = json_path.name
    if report.errors:
        report.files["errors"] = write_errors(report.errors, out_dir / "errors.csv").name
    if result.trajectory.snapshots:
        report.files["moments_final"] = write_moments(result.final, out_dir / "moments_final.csv").name
    for t in report.report_times:
        try:
            snap = result.trajectory.at(t)
        except KeyError:
            continue
        columns = [snap.x, snap.values[0], snap.values[1]]
        header = ["x", "m0", "m1"]
        if reference is not None:
            ref = extract_moments(reference.at(t), 1).values
            columns += [ref[0], ref[1]]
            header += ["m0_kinetic", "m1_kinetic"]
        path = out_dir / f"solution_t{t:g}.csv"
        with open(path, "w", newline="") as f:
            np.savetxt(f, np.column_stack(columns), fmt="%.17g", delimiter=",",
                       header=",".join(header), comments="")
        report.files[f"solution_t{t:g}"] = path.name
    if result.trajectory.snapshots and report.order >= 2:
        report.files["phase_portrait"] = phase_portrait(result.trajectory, out_dir / "phase_portrait.csv").name
    report.files["markdown"] = "report.md"
    render_markdown(report, out_dir / "report.md")
    (out_dir / "report.json").write_text(report.to_json() + "\n")
    logger.info(f"run report written to {out_dir}")


# ---------------------------------------------------------------------------
# Sweeps and exports
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    sigma_s: float
    closure: str
    err_m0: float
    err_m1: float
    blowup_time: Optional[float] = None


def sigma_sweep(closures: Dict[str, Closure], sigma_values: Sequence[float], order: int,
                config: Optional[BenchConfig] = None, t: float = 1.0,
                out_path=None) -> List[SweepRow]:
    """Error at time t of each closure on the constant benchmark, per sigma_s"""
    config = config or BenchConfig()
    rows = []
    for sigma in sigma_values:
        run_config = BenchConfig(**{**asdict(config), "sigma_s": float(sigma), "t_end": t})
        case = benchmark_ic("constant", run_config.nx, run_config.n_v, float(sigma))
        reference = kinetic_reference(case, _times(case, t), run_config)
        for name, closure in closures.items():
            report = run_benchmark("constant", closure, order, run_config, reference=reference)
            try:
                err = report.error_at(t)
                rows.append(SweepRow(float(sigma), name, err.err_m0, err.err_m1, report.blowup_time))
            except KeyError:
                rows.append(SweepRow(float(sigma), name, math.nan, math.nan, report.blowup_time))
            logger.info(f"sigma_s={sigma:g} {name}: err_m0={rows[-1].err_m0:.3e}")
    if out_path is not None:
        with open(out_path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["sigma_s", "closure", "err_m0", "err_m1", "blowup_time"])
            for row in rows:
                writer.writerow([_fmt(row.sigma_s), row.closure, _fmt(row.err_m0), _fmt(row.err_m1),
                                 "" if row.blowup_time is None else _fmt(row.blowup_time)])
    return rows


def convergence_table(reports: Sequence[RunReport], t: float, path) -> Path:
    """N, err_m0, err_m1 at time t for a list of runs"""
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["N", "closure", "err_m0", "err_m1"])
        for report in reports:
            try:
                row = report.error_at(t)
                writer.writerow([report.order, report.closure, _fmt(row.err_m0), _fmt(row.err_m1)])
            except KeyError:
                writer.writerow([report.order, report.closure, "nan", "nan"])
    return path


def phase_portrait(trajectory: Trajectory, path) -> Path:
    """Rows t, x, m1/m0, m2/m0 for every stored snapshot"""
    if not trajectory.snapshots:
        raise UsageError("trajectory holds no snapshots")
    path = Path(path)
    blocks = []
    for snap in trajectory.snapshots:
        if snap.order < 2:
            raise DimensionError("phase portrait needs moments up to m2")
        m0 = snap.values[0]
        blocks.append(np.column_stack([np.full(snap.nx, snap.t), snap.x,
                                       snap.values[1] / m0, snap.values[2] / m0]))
    with open(path, "w", newline="") as f:
        np.savetxt(f, np.vstack(blocks), fmt="%.17g", delimiter=",",
                   header="t,x,m1_over_m0,m2_over_m0", comments="")
    return path
