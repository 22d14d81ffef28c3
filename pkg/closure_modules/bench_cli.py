"""
Command-line interface

    gen-data     sample scenarios and generate training data
    train        train a closure network on a dataset
    solve        run the moment solver on a benchmark
    bench        compare closures with the kinetic reference
    diagnose     re-examine the final state of a run
    grid-search  architecture sweep, locally or as Slurm jobs

Exit status: 0 success, 1 usage error, 2 numeric failure, 3 blow-up (solve).
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from .bench import (
    DEFAULT_SIGMA_SWEEP,
    BenchConfig,
    closure_from_spec,
    convergence_table,
    read_moments,
    run_benchmark,
    run_solve,
    sigma_sweep,
)
from .closure import UNSTABLE_TOL, grid_spectrum_summary, weights_to_matrix
from .config import ProjectConfig, load_config
from .data import BENCHMARKS, benchmark_ic, generate_dataset, load_dataset, sample_scenarios
from .errors import ClosureError, UsageError
from .linalg import eigenvalues_batched, max_real_part_shifted_batched
from .nn import (
    GridCell,
    MlpModel,
    grid_cell_from_history,
    grid_search,
    save_model,
    standardize_inputs,
    train,
    write_grid,
)
from .slurm_job_manager import SlurmJobManager, grid_job_name

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_BLOWUP = 3


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports bad usage as UsageError instead of exiting"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def print_section(title: str) -> None:
    print(f"\n{'='*70}")
    print(title)
    print('='*70)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="closure", description="Hyperbolic moment closures for slab radiative transfer")
    parser.add_argument('--config', type=Path, default=None, help='YAML configuration file')
    parser.add_argument('--verbose', action='store_true', help='debug logging')
    subparsers = parser.add_subparsers(dest='command', required=True)

    # gen-data
    gen = subparsers.add_parser('gen-data', help='Generate training data with the kinetic solver')
    gen.add_argument('--seed', type=int)
    gen.add_argument('--count', type=int)
    gen.add_argument('--N', type=int, dest='order')
    gen.add_argument('--nx', type=int)
    gen.add_argument('--nv', type=int)
    gen.add_argument('--out', type=Path)
    gen.add_argument('--mpi', action='store_true', help='distribute scenarios over MPI ranks')
    gen.add_argument('--slurm-tasks', type=int, default=0,
                     help='write a Slurm MPI job script with this many ranks instead of running')

    # train
    tr = subparsers.add_parser('train', help='Train a closure network')
    tr.add_argument('--data', type=Path, required=True, help='dataset manifest.json')
    tr.add_argument('--head', choices=['bound', 'distinct'])
    tr.add_argument('--layers', type=int)
    tr.add_argument('--width', type=int)
    tr.add_argument('--activation', choices=['relu', 'tanh'])
    tr.add_argument('--gamma', type=float)
    tr.add_argument('--epochs', type=int)
    tr.add_argument('--lr', type=float)
    tr.add_argument('--l2', type=float)
    tr.add_argument('--batch', type=int)
    tr.add_argument('--seed', type=int)
    tr.add_argument('--out', type=Path, required=True, help='model JSON to write')

    # solve
    so = subparsers.add_parser('solve', help='Run the moment solver on a benchmark')
    which = so.add_mutually_exclusive_group(required=True)
    which.add_argument('--model', type=str)
    which.add_argument('--pn', action='store_true')
    so.add_argument('--benchmark', choices=sorted(BENCHMARKS), required=True)
    so.add_argument('--N', type=int, dest='order', required=True)
    so.add_argument('--nx', type=int)
    so.add_argument('--t-end', type=float)
    so.add_argument('--out', type=Path, required=True)

    # bench
    be = subparsers.add_parser('bench', help='Compare closures with the kinetic reference')
    be.add_argument('--model', type=str, help='model JSON; "{N}" is replaced by each order')
    be.add_argument('--pn', action='store_true', help='include the P_N closure')
    be.add_argument('--benchmark', choices=sorted(BENCHMARKS), required=True)
    be.add_argument('--N-list', type=int, nargs='+', dest='orders', required=True)
    be.add_argument('--nx', type=int)
    be.add_argument('--nv', type=int)
    be.add_argument('--t-end', type=float)
    be.add_argument('--sigma-sweep', type=float, nargs='*', default=None,
                    help='scattering coefficients for an error sweep on the constant benchmark '
                         '(no values: 0.1 0.3 1 3 10 30 100)')
    be.add_argument('--out', type=Path, required=True)

    # diagnose
    di = subparsers.add_parser('diagnose', help='Spectra and linear stability of a run\'s final state')
    di.add_argument('--run', type=Path, required=True, help='run directory with report.json')
    di.add_argument('--xi-range', type=int, nargs=2, metavar=('MIN', 'MAX'))

    # grid-search
    gs = subparsers.add_parser('grid-search', help='Architecture sweep')
    gs.add_argument('--data', type=Path, required=True)
    gs.add_argument('--out', type=Path, required=True)
    gs.add_argument('--layers-list', type=int, nargs='+', default=list(range(2, 11)))
    gs.add_argument('--widths', type=int, nargs='+', default=[16, 32, 64, 128, 256])
    gs.add_argument('--activations', nargs='+', choices=['relu', 'tanh'], default=['tanh', 'relu'])
    gs.add_argument('--epochs', type=int)
    gs.add_argument('--slurm', action='store_true', help='write one Slurm job per cell instead')
    gs.add_argument('--submit', action='store_true', help='submit the Slurm jobs')
    gs.add_argument('--wait', action='store_true',
                    help='wait for the submitted jobs, then collect grid.csv from their histories')
    return parser


def _pick(value, default):
    return default if value is None else value


def cmd_gen_data(args, cfg: ProjectConfig) -> int:
    data = cfg.data
    seed = _pick(args.seed, data.seed)
    count = _pick(args.count, data.count)
    order = _pick(args.order, data.order)
    nx = _pick(args.nx, data.nx)
    nv = _pick(args.nv, cfg.kinetic.n_v)
    out = _pick(args.out, Path(data.out_dir))

    if args.slurm_tasks > 0:
        manager = SlurmJobManager(cfg.slurm)
        manager.generate_data_job(f"gen_data_N{order}", count, order, str(out),
                                  num_tasks=args.slurm_tasks, nx=nx, nv=nv, seed=seed)
        return EXIT_OK

    print_section(f"Generating {count} scenarios (N={order}, Nx={nx}, n_v={nv})")
    scenarios = sample_scenarios(seed, count)
    kinetic = replace(cfg.kinetic, n_v=nv)
    manifest = generate_dataset(scenarios, order, out, nx=nx, config=kinetic, seed=seed,
                                use_mpi=args.mpi or data.use_mpi)
    print(f"✓ {len(manifest.files)} scenarios written to {out}")
    if manifest.failures:
        print(f"⚠ {len(manifest.failures)} scenarios failed (see manifest.json)")
    return EXIT_OK


def cmd_train(args, cfg: ProjectConfig) -> int:
    model_cfg = cfg.model
    train_cfg = replace(
        cfg.train,
        epochs=_pick(args.epochs, cfg.train.epochs),
        learning_rate=_pick(args.lr, cfg.train.learning_rate),
        l2=_pick(args.l2, cfg.train.l2),
        batch_size=_pick(args.batch, cfg.train.batch_size),
        seed=_pick(args.seed, cfg.train.seed),
    )
    split = load_dataset(args.data, cfg.data.validation_fraction, train_cfg.seed)
    if len(split.train) == 0:
        raise UsageError(f"dataset {args.data} has no training rows")
    layers = _pick(args.layers, model_cfg.layers)
    width = _pick(args.width, model_cfg.width)
    model = MlpModel.initialize(split.train.order, [width] * layers,
                                _pick(args.activation, model_cfg.activation),
                                _pick(args.head, model_cfg.head),
                                _pick(args.gamma, model_cfg.gamma), seed=train_cfg.seed)
    if model_cfg.standardize:
        model = standardize_inputs(model, split.train)

    print_section(f"Training {model.head} head, {layers}x{width} {model.activation}, "
                  f"{len(split.train)} samples")
    validation = split.validation if len(split.validation) else None
    result = train(split.train, train_cfg, model, validation)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_model(result.model, args.out)
    history = result.write_history(args.out.with_suffix(".history.csv"))
    final = result.history[-1]
    print(f"✓ Model written: {args.out} (best epoch {result.best_epoch})")
    print(f"  train E2 {final.train_E2:.4e}, validation E2 {final.val_E2:.4e}")
    print(f"  history: {history}")
    return EXIT_OK


def _bench_config(args, cfg: ProjectConfig) -> BenchConfig:
    return BenchConfig(
        nx=_pick(getattr(args, 'nx', None), cfg.solver.nx),
        n_v=_pick(getattr(args, 'nv', None), cfg.kinetic.n_v),
        cfl=cfg.solver.cfl,
        weno_variant=cfg.solver.weno_variant,
        stability_every=cfg.solver.stability_every,
        t_end=getattr(args, 't_end', None),
    )


def cmd_solve(args, cfg: ProjectConfig) -> int:
    closure = closure_from_spec("pn" if args.pn else args.model, args.order)
    report = run_solve(args.benchmark, closure, args.order, _bench_config(args, cfg), args.out)
    print_section(f"Solve: {args.benchmark}, {closure.tag}, N={args.order}")
    print(f"  steps: {report.steps}")
    print(f"  max |eig|: {report.max_abs_eig:.6f}, all real: {report.all_real}")
    if not report.completed:
        print(f"✗ Solution blew up at t={report.blowup_time:.4f}; report in {args.out}")
        return EXIT_BLOWUP
    print(f"✓ Report written to {args.out}")
    return EXIT_OK


def cmd_bench(args, cfg: ProjectConfig) -> int:
    if not args.pn and not args.model:
        raise UsageError("bench needs --pn and/or --model")
    args.out.mkdir(parents=True, exist_ok=True)
    config = _bench_config(args, cfg)
    case_times = BENCHMARKS[args.benchmark]
    reports = []
    for order in args.orders:
        closures = []
        if args.pn:
            closures.append(closure_from_spec("pn", order))
        if args.model:
            closures.append(closure_from_spec(args.model.replace("{N}", str(order)), order))
        for closure in closures:
            out = args.out / f"{args.benchmark}_N{order}_{closure.tag}"
            report = run_benchmark(args.benchmark, closure, order, config, out)
            reports.append(report)
            status = "✓" if report.completed else "✗"
            last = report.errors[-1] if report.errors else None
            summary = f"err_m0={last.err_m0:.3e} err_m1={last.err_m1:.3e}" if last else "no snapshots"
            print(f"{status} N={order} {closure.tag}: {summary}")
    t_report = min(config.t_end or max(case_times), max(case_times))
    table = convergence_table(reports, t_report, args.out / "convergence.csv")
    print(f"✓ Convergence table: {table}")

    if args.sigma_sweep is not None:
        sigmas = args.sigma_sweep or list(DEFAULT_SIGMA_SWEEP)
        for order in args.orders:
            closures = {}
            if args.pn:
                closures["pn"] = closure_from_spec("pn", order)
            if args.model:
                ml = closure_from_spec(args.model.replace("{N}", str(order)), order)
                closures[ml.tag] = ml
            path = args.out / f"sigma_sweep_N{order}.csv"
            sigma_sweep(closures, sigmas, order, config, t=t_report, out_path=path)
            print(f"✓ Scattering sweep: {path}")
    return EXIT_OK


def cmd_diagnose(args, cfg: ProjectConfig) -> int:
    report_path = args.run / "report.json"
    if not report_path.exists():
        raise UsageError(f"{args.run} holds no report.json")
    report = json.loads(report_path.read_text())
    moments_path = args.run / "moments_final.csv"
    if not moments_path.exists():
        when = report.get("blowup_time")
        reason = (f"blew up at t={when:g} before its first snapshot" if when is not None
                  else "stored no final state")
        raise UsageError(f"run {args.run} {reason}: {moments_path.name} is missing")
    state = read_moments(moments_path)
    order = int(report["order"])
    closure = closure_from_spec(report["closure_source"] or "pn", order)
    medium = benchmark_ic(report["benchmark"], state.nx, cfg.kinetic.n_v, report.get("sigma_s")).medium

    weights, spectra = closure.evaluate(state.values.T)
    A = weights_to_matrix(weights)
    if spectra is None:
        spectra = eigenvalues_batched(A)
    summary = grid_spectrum_summary(spectra, cfg.solver.thresholds)

    xi_min, xi_max = args.xi_range or (cfg.solver.xi_min, cfg.solver.xi_max)
    xis = np.arange(xi_min, xi_max + 1, dtype=float)
    max_real = max_real_part_shifted_batched(A, medium.source_diagonal(order).T, xis)
    unstable = max_real > UNSTABLE_TOL
    out = args.run / "stability.csv"
    with open(out, "w", newline="") as f:
        np.savetxt(f, np.column_stack([xis, max_real.max(axis=0), unstable.sum(axis=0)]),
                   fmt=["%d", "%.17g", "%d"], delimiter=",",
                   header="xi,max_real,unstable_points", comments="")

    print_section(f"Diagnostics: {args.run}")
    print(f"  all real: {summary['all_real']}")
    print(f"  max |eig|: {summary['max_abs_eig']:.6f}, min gap: {summary['min_gap']:.3e}")
    for eps, count in summary["close_counts"].items():
        print(f"  grid points with gap < {eps:g}: {count}")
    marker = "✓" if not unstable.any() else "⚠"
    print(f"{marker} unstable wave numbers: {int(unstable.any(axis=0).sum())} of {len(xis)}; "
          f"unstable grid points: {int(unstable.any(axis=1).sum())}")
    print(f"  stability scan: {out}")
    return EXIT_OK


def _collect_submitted_grid(manager: SlurmJobManager, job_ids, cells, out: Path) -> Path:
    states = manager.wait_for_jobs(job_ids)
    results = []
    for layers, width, activation in cells:
        name = grid_job_name(layers, width, activation)
        history = (out / "models" / f"{name}.json").with_suffix(".history.csv")
        if states.get(name) == "COMPLETED" and history.exists():
            results.append(grid_cell_from_history(history, layers, width, activation))
        else:
            results.append(GridCell(layers, width, activation))
    path = write_grid(results, out / "grid.csv")
    missing = sum(1 for cell in results if np.isnan(cell.train_E2))
    marker = "✓" if not missing else "⚠"
    print(f"{marker} Grid written: {path} ({missing} of {len(cells)} cells without results)")
    return path


def cmd_grid_search(args, cfg: ProjectConfig) -> int:
    if args.wait and not (args.slurm and args.submit):
        raise UsageError("--wait needs --slurm --submit")
    epochs = _pick(args.epochs, cfg.train.epochs)
    cells = [(layers, width, activation) for activation in args.activations
             for layers in args.layers_list for width in args.widths]
    args.out.mkdir(parents=True, exist_ok=True)

    if args.slurm:
        manager = SlurmJobManager(cfg.slurm)
        scripts = manager.generate_grid_search_jobs(str(args.data), cells, args.out / "models",
                                                    cfg.model.head, epochs, cfg.train.seed)
        if args.submit:
            job_ids = manager.submit_jobs(scripts)
            submitted = {name: job for name, job in job_ids.items() if job is not None}
            print(f"✓ Submitted {len(submitted)}/{len(scripts)} jobs")
            if args.wait:
                _collect_submitted_grid(manager, submitted, cells, args.out)
        return EXIT_OK

    split = load_dataset(args.data, cfg.data.validation_fraction, cfg.train.seed)
    validation = split.validation if len(split.validation) else None
    print_section(f"Grid search over {len(cells)} cells")
    results = grid_search(split.train, validation, replace(cfg.train, epochs=epochs),
                          args.layers_list, args.widths, args.activations,
                          cfg.model.head, cfg.model.gamma)
    path = write_grid(results, args.out / "grid.csv")
    print(f"✓ Grid written: {path}")
    return EXIT_OK


COMMANDS = {
    'gen-data': cmd_gen_data,
    'train': cmd_train,
    'solve': cmd_solve,
    'bench': cmd_bench,
    'diagnose': cmd_diagnose,
    'grid-search': cmd_grid_search,
}


def main(argv: Optional[List[str]] = None) -> int:
    """CLI entry point; returns the exit status"""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"✗ {e}", file=sys.stderr)
        return e.exit_code

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ClosureError as e:
        print(f"✗ {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
