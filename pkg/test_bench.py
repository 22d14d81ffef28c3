#!/usr/bin/env python3
"""
Benchmark harness tests: error metric, run reports, sweeps and exports

Usage:
    uv run pytest test_bench.py
"""

import csv
import json
import math
from dataclasses import asdict

import numpy as np
import pytest

from closure_modules.bench import (
    BenchConfig,
    RunReport,
    closure_from_spec,
    convergence_table,
    diagnostics_report,
    kinetic_reference,
    phase_portrait,
    read_moments,
    relative_l2,
    run_benchmark,
    run_solve,
    sigma_sweep,
    write_moments,
)
from closure_modules.bench_cli import main
from closure_modules.closure import MLClosure, PNClosure
from closure_modules.data import CONSTANT_FOURIER, Scenario, benchmark_ic, generate_dataset, load_dataset, sample_scenarios
from closure_modules.errors import DegenerateInputError, DimensionError, UsageError
from closure_modules.fields import MomentField
from closure_modules.kinetic import KineticConfig
from closure_modules.momsolver import Trajectory
from closure_modules.nn import MlpModel, TrainConfig, save_model, standardize_inputs, train

SMALL = BenchConfig(nx=32, n_v=8, stability_every=5, t_end=0.5)


def test_relative_l2_examples():
    b = np.array([1.0, 2.0, 3.0])
    assert relative_l2(b, b) == 0.0
    assert relative_l2(np.zeros(3), b) == pytest.approx(1.0)
    assert relative_l2(1.1 * b, b) == pytest.approx(0.1)


def test_relative_l2_errors():
    with pytest.raises(DegenerateInputError):
        relative_l2(np.ones(3), np.zeros(3))
    with pytest.raises(DimensionError):
        relative_l2(np.ones(3), np.ones(4))


def test_closure_from_spec(tmp_path):
    assert isinstance(closure_from_spec("pn", 3), PNClosure)
    path = tmp_path / "model.json"
    save_model(MlpModel.initialize(2, [4], "tanh", "bound", seed=0), path)
    closure = closure_from_spec(str(path), 2)
    assert closure.tag == "ml-bound"
    assert closure.source == str(path)
    with pytest.raises(UsageError):
        closure_from_spec(str(path), 3)


def test_run_benchmark_writes_report(tmp_path):
    report = run_benchmark("constant", PNClosure(2), 2, SMALL, tmp_path)
    assert report.completed
    assert report.report_times == [0.5]
    assert [row.t for row in report.errors] == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5])
    row = report.error_at(0.5)
    assert 0.0 < row.err_m0 < 0.5
    assert math.isfinite(row.err_m1)
    assert report.all_real
    assert report.max_unstable_xi == 0

    for name in ["report.json", "report.md", "errors.csv", "diagnostics.csv", "diagnostics.json",
                 "moments_final.csv", "solution_t0.5.csv", "phase_portrait.csv"]:
        assert (tmp_path / name).exists(), name
    record = json.loads((tmp_path / "report.json").read_text())
    assert record["completed"] is True
    assert record["closure_source"] == "pn"
    header = (tmp_path / "solution_t0.5.csv").read_text().splitlines()[0]
    assert header == "x,m0,m1,m0_kinetic,m1_kinetic"
    assert "constant / pn" in (tmp_path / "report.md").read_text()


def test_run_solve_has_no_errors(tmp_path):
    report = run_solve("gaussian", PNClosure(3), 3, BenchConfig(nx=32, n_v=8, stability_every=0, t_end=0.2),
                       tmp_path)
    assert report.completed
    assert report.errors == []
    assert report.steps > 0
    final = read_moments(tmp_path / "moments_final.csv")
    assert final.order == 3 and final.nx == 32
    with pytest.raises(KeyError):
        report.error_at(0.2)


def test_diagnostics_report_rejects_empty_stream(tmp_path):
    with pytest.raises(UsageError):
        diagnostics_report([], tmp_path)


def test_diagnostics_columns(tmp_path):
    run_benchmark("gaussian", PNClosure(2), 2, BenchConfig(nx=32, n_v=8, stability_every=2, t_end=0.1), tmp_path)
    with open(tmp_path / "diagnostics.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0][:5] == ["step", "t", "max_abs_eig", "min_gap", "all_real"]
    assert rows[0][5:9] == ["count_eps_0.001", "count_eps_0.0001", "count_eps_1e-05", "count_eps_1e-06"]
    assert rows[0][-3:] == ["unstable_xi_count", "unstable_points", "Linf_m0"]
    assert [int(r[0]) for r in rows[1:]] == list(range(len(rows) - 1))
    assert rows[2][-3] == "-1"
    payload = json.loads((tmp_path / "diagnostics.json").read_text())
    assert payload["nonfinite_steps"] == []


def test_sigma_sweep(tmp_path):
    path = tmp_path / "sweep.csv"
    rows = sigma_sweep({"pn": PNClosure(2)}, [0.5, 2.0], 2, BenchConfig(nx=32, n_v=8, stability_every=0),
                       t=0.2, out_path=path)
    assert [r.sigma_s for r in rows] == [0.5, 2.0]
    assert all(math.isfinite(r.err_m0) and r.blowup_time is None for r in rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "sigma_s,closure,err_m0,err_m1,blowup_time"
    assert len(lines) == 3


def test_convergence_table_marks_missing_times(tmp_path):
    report = RunReport("constant", "pn", 4, 32, 0.5, [0.5])
    path = convergence_table([report], 0.5, tmp_path / "convergence.csv")
    assert path.read_text().splitlines()[1] == "4,pn,nan,nan"


def test_moments_file_round_trip(tmp_path):
    field_ = MomentField(np.random.default_rng(0).normal(size=(3, 16)))
    restored = read_moments(write_moments(field_, tmp_path / "m.csv"))
    np.testing.assert_array_equal(restored.values, field_.values)


def test_phase_portrait(tmp_path):
    values = np.vstack([np.full(8, 2.0), np.full(8, 0.5), np.full(8, 1.0)])
    path = phase_portrait(Trajectory([MomentField(values, 0.25)]), tmp_path / "phase.csv")
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    assert table.shape == (8, 4)
    np.testing.assert_allclose(table[:, 0], 0.25)
    np.testing.assert_allclose(table[:, 2:], [[0.25, 0.5]] * 8)
    with pytest.raises(UsageError):
        phase_portrait(Trajectory(), tmp_path / "empty.csv")
    with pytest.raises(DimensionError):
        phase_portrait(Trajectory([MomentField(values[:2])]), tmp_path / "low.csv")


# ---------------------------------------------------------------------------
# Full-scale runs (pytest -m slow)
# ---------------------------------------------------------------------------

DESK = BenchConfig(nx=64, n_v=16, stability_every=50)


def desk_trained_model(out_dir, order: int):
    """Bound-head model trained on 30 random scenarios plus the constant benchmark's own"""
    scenarios = sample_scenarios(seed=0, count=30)
    scenarios.append(Scenario(30, {"family": "fourier", **CONSTANT_FOURIER}, 1.0, 1.0))
    manifest = generate_dataset(scenarios, order, out_dir, nx=DESK.nx, config=KineticConfig(n_v=DESK.n_v))
    assert len(manifest.files) >= 30
    split = load_dataset(out_dir / "manifest.json", validation_fraction=0.1, seed=0)
    model = standardize_inputs(MlpModel.initialize(order, [32, 32], "tanh", "bound", seed=0), split.train)
    config = TrainConfig(epochs=200, learning_rate=1e-3, decay_every=100, batch_size=256, seed=0)
    return train(split.train, config, model, split.validation)


@pytest.fixture(scope="module")
def desk_n6(tmp_path_factory):
    return desk_trained_model(tmp_path_factory.mktemp("desk_n6"), 6)


@pytest.mark.slow
def test_optically_thick_pn_matches_kinetic():
    config = BenchConfig(nx=128, n_v=16, stability_every=0, t_end=1.0, sigma_s=100.0)
    report = run_benchmark("constant", PNClosure(6), 6, config)
    assert report.completed
    assert report.error_at(1.0).err_m0 < 1e-2


@pytest.mark.slow
def test_desk_training_halves_error(desk_n6):
    assert desk_n6.history[-1].train_E2 <= 0.5 * desk_n6.history[0].train_E2


@pytest.mark.slow
def test_trained_closure_beats_pn_on_constant_benchmark(desk_n6):
    config = BenchConfig(**{**asdict(DESK), "t_end": 1.0})
    case = benchmark_ic("constant", config.nx, config.n_v)
    reference = kinetic_reference(case, [0.5, 1.0], config)
    ml = run_benchmark("constant", MLClosure(desk_n6.model), 6, config, reference=reference)
    pn = run_benchmark("constant", PNClosure(6), 6, config, reference=reference)
    assert ml.completed
    assert ml.error_at(1.0).err_m0 < pn.error_at(1.0).err_m0


@pytest.mark.slow
def test_trained_n6_closure_runs_to_long_time(desk_n6):
    report = run_solve("constant", MLClosure(desk_n6.model), 6, BenchConfig(**{**asdict(DESK), "t_end": 10.0}))
    assert report.completed
    assert report.all_real
    assert report.max_abs_eig <= 1.0


@pytest.mark.slow
def test_trained_n3_closure_reports_blow_up_as_exit_status(tmp_path):
    result = desk_trained_model(tmp_path / "data", 3)
    path = save_model(result.model, tmp_path / "model_3.json")
    run = tmp_path / "run"
    code = main(["solve", "--model", str(path), "--benchmark", "constant", "--N", "3",
                 "--nx", str(DESK.nx), "--t-end", "1", "--out", str(run)])
    record = json.loads((run / "report.json").read_text())
    assert code in (0, 3)
    assert (code == 3) == (record["completed"] is False)
    if code == 3:
        assert 0.0 <= record["blowup_time"] < 1.0
