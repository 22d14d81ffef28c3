#!/usr/bin/env python3
"""
Command-line tests: exit statuses and the files each subcommand leaves behind

Usage:
    uv run pytest test_cli.py
"""

import json
import subprocess

import numpy as np

from closure_modules import slurm_job_manager
from closure_modules.bench_cli import main
from closure_modules.closure import UNSTABLE_TOL
from closure_modules.data import Scenario, generate_dataset
from closure_modules.kinetic import KineticConfig
from closure_modules.nn import MlpModel, save_model


def small_dataset(out_dir, count: int = 3):
    scenarios = [Scenario(i, {"family": "fourier", "a0": 2.0, "a": [0.2 * i, 0.1, 0.0], "b": [0.3, 0.0, -0.1]},
                          1.0, 0.0, t_end=0.1, sample_times=(0.05, 0.1))
                 for i in range(count)]
    generate_dataset(scenarios, 2, out_dir, nx=16, config=KineticConfig(n_v=8))
    return out_dir / "manifest.json"


def test_unknown_flag_is_usage_error():
    assert main(["solve", "--frobnicate"]) == 1


def test_missing_required_option():
    assert main(["train", "--out", "model.json"]) == 1


def test_bench_needs_a_closure(tmp_path):
    assert main(["bench", "--benchmark", "constant", "--N-list", "2", "--out", str(tmp_path)]) == 1


def test_missing_model_file(tmp_path):
    code = main(["solve", "--model", str(tmp_path / "absent.json"), "--benchmark", "constant",
                 "--N", "2", "--out", str(tmp_path / "run")])
    assert code == 1


def test_solve_then_diagnose(tmp_path, capsys):
    run = tmp_path / "run"
    code = main(["solve", "--pn", "--benchmark", "constant", "--N", "2", "--nx", "32",
                 "--t-end", "0.2", "--out", str(run)])
    assert code == 0
    report = json.loads((run / "report.json").read_text())
    assert report["completed"] is True
    assert report["order"] == 2

    assert main(["diagnose", "--run", str(run), "--xi-range", "-5", "5"]) == 0
    table = np.loadtxt(run / "stability.csv", delimiter=",", skiprows=1)
    assert table.shape == (11, 3)
    np.testing.assert_array_equal(table[:, 0], np.arange(-5, 6))
    assert np.all(table[:, 1] <= UNSTABLE_TOL)
    assert "unstable wave numbers: 0 of 11" in capsys.readouterr().out


def test_diagnose_needs_report(tmp_path):
    assert main(["diagnose", "--run", str(tmp_path)]) == 1


def test_diagnose_run_that_blew_up_before_any_snapshot(tmp_path):
    model = MlpModel.initialize(2, [4], "tanh", "bound", seed=0)
    _, b = model.layers[-1]
    broken = model.with_parameters(model.parameters()[:-1] + [np.full_like(b, np.nan)])
    path = save_model(broken, tmp_path / "broken.json")

    run = tmp_path / "run"
    code = main(["solve", "--model", str(path), "--benchmark", "constant", "--N", "2", "--nx", "32",
                 "--t-end", "0.2", "--out", str(run)])
    assert code == 3
    report = json.loads((run / "report.json").read_text())
    assert report["completed"] is False
    assert report["blowup_time"] == 0.0
    assert not (run / "moments_final.csv").exists()

    assert main(["diagnose", "--run", str(run)]) == 1


def test_bench_writes_tables(tmp_path):
    out = tmp_path / "bench"
    code = main(["bench", "--pn", "--benchmark", "constant", "--N-list", "1", "2", "--nx", "32", "--nv", "8",
                 "--t-end", "0.2", "--sigma-sweep", "0.5", "2", "--out", str(out)])
    assert code == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "N,closure,err_m0,err_m1"
    assert [line.split(",")[0] for line in lines[1:]] == ["1", "2"]
    assert (out / "constant_N2_pn" / "report.json").exists()
    assert len((out / "sigma_sweep_N1.csv").read_text().splitlines()) == 3


def test_train_and_solve_with_model(tmp_path):
    manifest = small_dataset(tmp_path / "data")
    model = tmp_path / "models" / "model_2.json"
    code = main(["train", "--data", str(manifest), "--layers", "1", "--width", "4", "--epochs", "2",
                 "--batch", "16", "--out", str(model)])
    assert code == 0
    assert model.exists()
    assert len(model.with_suffix(".history.csv").read_text().splitlines()) == 4

    run = tmp_path / "run"
    code = main(["solve", "--model", str(model), "--benchmark", "gaussian", "--N", "2", "--nx", "32",
                 "--t-end", "0.1", "--out", str(run)])
    assert code in (0, 3)
    assert json.loads((run / "report.json").read_text())["closure_source"] == str(model)


def test_gen_data_writes_slurm_script(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code = main(["gen-data", "--count", "8", "--N", "3", "--out", "data", "--slurm-tasks", "4"])
    assert code == 0
    script = (tmp_path / "slurm_jobs" / "gen_data_N3.sh").read_text()
    assert "#SBATCH --ntasks=4" in script
    assert "--count 8" in script and "--mpi" in script


def test_gen_data_runs_serially(tmp_path):
    out = tmp_path / "data"
    code = main(["gen-data", "--seed", "1", "--count", "2", "--N", "2", "--nx", "32", "--nv", "8",
                 "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["files"]) + len(manifest["failures"]) == 2


def test_grid_search_slurm_scripts(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code = main(["grid-search", "--data", "data/manifest.json", "--out", "grid", "--layers-list", "2", "3",
                 "--widths", "16", "--activations", "tanh", "--slurm"])
    assert code == 0
    names = sorted(p.name for p in (tmp_path / "slurm_jobs").glob("grid_*.sh"))
    assert names == ["grid_L2_W16_tanh.sh", "grid_L3_W16_tanh.sh"]


def test_grid_search_local(tmp_path):
    manifest = small_dataset(tmp_path / "data")
    out = tmp_path / "grid"
    code = main(["grid-search", "--data", str(manifest), "--out", str(out), "--layers-list", "1",
                 "--widths", "4", "8", "--activations", "relu", "--epochs", "1"])
    assert code == 0
    assert len((out / "grid.csv").read_text().splitlines()) == 3


def test_bench_sigma_sweep_without_values_uses_default_grid(tmp_path):
    out = tmp_path / "bench"
    code = main(["bench", "--pn", "--benchmark", "constant", "--N-list", "1", "--nx", "128", "--nv", "4",
                 "--t-end", "0.05", "--sigma-sweep", "--out", str(out)])
    assert code == 0
    rows = (out / "sigma_sweep_N1.csv").read_text().splitlines()[1:]
    assert [float(row.split(",")[0]) for row in rows] == [0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0]


class CompletingScheduler:
    """sbatch hands out job IDs from 100; every job has already finished when polled"""

    def __init__(self):
        self.calls = []

    def __call__(self, cmd, **kwargs):
        self.calls.append(cmd)
        stdout = ""
        if cmd[0] == "sbatch":
            stdout = f"Submitted batch job {100 + sum(1 for c in self.calls if c[0] == 'sbatch')}\n"
        elif cmd[0] == "sacct":
            stdout = "COMPLETED\n"
        return subprocess.CompletedProcess(cmd, 0, stdout=stdout, stderr="")


def test_grid_search_waits_for_submitted_cells(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    scheduler = CompletingScheduler()
    monkeypatch.setattr(slurm_job_manager.subprocess, "run", scheduler)
    models = tmp_path / "grid" / "models"
    models.mkdir(parents=True)
    (models / "grid_L2_W16_tanh.history.csv").write_text(
        "epoch,lr,train_loss,train_E2,val_E2\n0,0.001,1.0,0.9,0.95\n1,0.001,0.5,0.25,0.5\n")

    code = main(["grid-search", "--data", "data/manifest.json", "--out", "grid", "--layers-list", "2", "3",
                 "--widths", "16", "--activations", "tanh", "--slurm", "--submit", "--wait"])
    assert code == 0
    assert [cmd[0] for cmd in scheduler.calls].count("sbatch") == 2
    lines = (tmp_path / "grid" / "grid.csv").read_text().splitlines()
    assert lines[1] == "2,16,tanh,0.25,0.5"
    assert lines[2] == "3,16,tanh,nan,nan"


def test_grid_search_wait_needs_submission(tmp_path):
    assert main(["grid-search", "--data", "data/manifest.json", "--out", str(tmp_path / "grid"),
                 "--slurm", "--wait"]) == 1
