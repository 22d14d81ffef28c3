"""
Slurm Job Manager for closure sweeps

Renders sbatch scripts from Jinja2 templates for the two workloads that
outgrow a desk machine:

- one job per (hidden layers, width, activation) cell of the grid search
- one MPI job generating training scenarios across ranks

and submits them with sbatch, then follows them with squeue/sacct until
they finish.
"""

import re
import subprocess
import time
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from jinja2 import Environment, FileSystemLoader

from .config import SlurmConfig

SUBMITTED_PATTERN = re.compile(r"Submitted batch job (\d+)")
FINAL_STATES = frozenset({"COMPLETED", "FAILED", "CANCELLED", "TIMEOUT", "OUT_OF_MEMORY",
                          "NODE_FAIL", "PREEMPTED", "BOOT_FAIL", "DEADLINE"})


def grid_job_name(layers: int, width: int, activation: str) -> str:
    return f"grid_L{layers}_W{width}_{activation}"


class SlurmJobManager:
    """
    Generates and submits Slurm batch scripts.

    Attributes:
        config (SlurmConfig): partition, limits and interpreter
        jobs_dir (Path): Directory for generated job scripts
        results_dir (Path): Directory for job output files
    """

    def __init__(self, config: Optional[SlurmConfig] = None,
                 jobs_dir: Optional[Path] = None,
                 results_dir: Optional[Path] = None):
        """
        Initialize the job manager.

        Args:
            config: Slurm section of the project configuration
            jobs_dir: Directory for generated job scripts
            results_dir: Directory for job output files
        """
        self.config = config or SlurmConfig()
        self.jobs_dir = Path(jobs_dir or self.config.jobs_dir)
        self.results_dir = Path(results_dir or self.config.results_dir)
        self.jobs_dir.mkdir(parents=True, exist_ok=True)
        self.results_dir.mkdir(parents=True, exist_ok=True)

        templates_path = Path(__file__).parent / "templates" / "slurm_jobs"
        self.jinja_env = Environment(
            loader=FileSystemLoader(str(templates_path)),
            trim_blocks=True,
            lstrip_blocks=True
        )

    def _write_script(self, job_name: str, text: str) -> Path:
        job_file = self.jobs_dir / f"{job_name}.sh"
        job_file.write_text(text)
        job_file.chmod(0o755)
        return job_file

    def generate_grid_cell_job(self,
                               job_name: str,
                               data: str,
                               layers: int,
                               width: int,
                               activation: str,
                               model_out: str,
                               head: str = "bound",
                               epochs: int = 1000,
                               seed: int = 0) -> Path:
        """
        Generate the training job of one grid-search cell.

        Args:
            job_name: Name of the job
            data: Dataset manifest path
            layers: Number of hidden layers
            width: Nodes per hidden layer
            activation: relu or tanh
            model_out: Where the trained model JSON goes
            head: bound or distinct
            epochs: Training epochs
            seed: Training seed

        Returns:
            Path to generated job script
        """
        template = self.jinja_env.get_template("grid_cell.sh.j2")
        job_script = template.render(
            job_name=job_name,
            partition=self.config.partition,
            cpus_per_task=self.config.cpus_per_task,
            time_limit=self.config.time_limit,
            output_file=str(self.results_dir / f"{job_name}_%j.out"),
            error_file=str(self.results_dir / f"{job_name}_%j.err"),
            python=self.config.python,
            data=data,
            head=head,
            layers=layers,
            width=width,
            activation=activation,
            epochs=epochs,
            seed=seed,
            model_out=model_out,
        )
        return self._write_script(job_name, job_script)

    def generate_grid_search_jobs(self,
                                  data: str,
                                  cells: Iterable[Tuple[int, int, str]],
                                  models_dir: Path,
                                  head: str = "bound",
                                  epochs: int = 1000,
                                  seed: int = 0) -> List[Path]:
        """
        Generate one job per (layers, width, activation) cell.

        Returns:
            Paths of the generated scripts, in cell order
        """
        models_dir = Path(models_dir)
        scripts = []
        for layers, width, activation in cells:
            job_name = grid_job_name(layers, width, activation)
            scripts.append(self.generate_grid_cell_job(
                job_name, data, layers, width, activation,
                str(models_dir / f"{job_name}.json"), head, epochs, seed))
        print(f"✓ Generated {len(scripts)} grid-search job scripts in {self.jobs_dir}")
        return scripts

    def generate_data_job(self,
                          job_name: str,
                          count: int,
                          order: int,
                          out_dir: str,
                          num_tasks: int,
                          num_nodes: int = 1,
                          nx: int = 256,
                          nv: int = 64,
                          seed: int = 0) -> Path:
        """
        Generate the MPI data-generation job.

        Args:
            job_name: Name of the job
            count: Number of scenarios
            order: Closure order N
            out_dir: Dataset directory
            num_tasks: MPI ranks (scenarios go round-robin over them)
            num_nodes: Nodes to spread the ranks over
            nx: Grid size
            nv: Number of ordinates
            seed: Scenario seed

        Returns:
            Path to generated job script
        """
        template = self.jinja_env.get_template("data_array.sh.j2")
        job_script = template.render(
            job_name=job_name,
            partition=self.config.partition,
            num_nodes=min(num_nodes, num_tasks),
            num_tasks=num_tasks,
            time_limit=self.config.time_limit,
            output_file=str(self.results_dir / f"{job_name}_%j.out"),
            error_file=str(self.results_dir / f"{job_name}_%j.err"),
            python=self.config.python,
            count=count,
            order=order,
            nx=nx,
            nv=nv,
            seed=seed,
            out_dir=out_dir,
        )
        job_file = self._write_script(job_name, job_script)
        print(f"✓ Generated data-generation job script: {job_file}")
        return job_file

    def submit_job(self, job_script: Path) -> Optional[int]:
        """
        Submit one script with sbatch.

        Returns:
            Job ID, or None when sbatch failed or printed no job ID
        """
        try:
            result = subprocess.run(["sbatch", str(job_script)],
                                    capture_output=True, text=True, check=True)
        except subprocess.CalledProcessError as e:
            print(f"✗ sbatch rejected {job_script.name}: {e.stderr.strip()}")
            return None
        except OSError as e:
            print(f"✗ sbatch unavailable: {e}")
            return None

        match = SUBMITTED_PATTERN.search(result.stdout)
        if match is None:
            print(f"⚠ Unexpected sbatch output for {job_script.name}: {result.stdout.strip()}")
            return None
        job_id = int(match.group(1))
        print(f"✓ {job_script.stem} submitted as job {job_id}")
        return job_id

    def submit_jobs(self, scripts: Iterable[Path]) -> Dict[str, Optional[int]]:
        """Submit every script; maps job name (script stem) to its ID or None"""
        return {script.stem: self.submit_job(script) for script in scripts}

    def _query(self, cmd: List[str]) -> Optional[str]:
        try:
            result = subprocess.run(cmd, capture_output=True, text=True, check=True)
        except (subprocess.CalledProcessError, OSError):
            return None
        lines = [line.strip() for line in result.stdout.splitlines() if line.strip()]
        return lines[0].split()[0].rstrip('+') if lines else None

    def job_state(self, job_id: int) -> str:
        """
        Current Slurm state of a job.

        squeue answers while the job is queued or running; once it has left
        the queue the final state comes from sacct. UNKNOWN when neither
        knows the job.
        """
        state = self._query(["squeue", "--noheader", "--jobs", str(job_id), "--format=%T"])
        if state is None:
            state = self._query(["sacct", "--noheader", "--allocations", "--jobs", str(job_id),
                                 "--format=State"])
        return state or "UNKNOWN"

    def cancel_jobs(self, job_ids: Iterable[int]) -> bool:
        """scancel all given jobs in one call; True on success"""
        ids = [str(job_id) for job_id in job_ids]
        if not ids:
            return True
        try:
            subprocess.run(["scancel", *ids], capture_output=True, check=True)
        except (subprocess.CalledProcessError, OSError):
            print(f"✗ scancel failed for jobs {' '.join(ids)}")
            return False
        print(f"✓ Cancelled jobs {' '.join(ids)}")
        return True

    def wait_for_jobs(self, job_ids: Dict[str, int], poll_interval: Optional[float] = None,
                      timeout: Optional[float] = None) -> Dict[str, str]:
        """
        Poll until every job reaches a final state.

        Jobs still pending or running at the timeout are cancelled and
        reported as TIMEOUT.

        Args:
            job_ids: job name -> Slurm job ID
            poll_interval: seconds between polls (config default)
            timeout: seconds before the remaining jobs are cancelled (config default)

        Returns:
            job name -> final state (COMPLETED, FAILED, CANCELLED, TIMEOUT, ...)
        """
        poll_interval = self.config.poll_interval if poll_interval is None else poll_interval
        timeout = self.config.wait_timeout if timeout is None else timeout
        deadline = time.monotonic() + timeout
        states: Dict[str, str] = {}
        pending = dict(job_ids)
        while pending:
            for name, job_id in list(pending.items()):
                state = self.job_state(job_id)
                if state in FINAL_STATES:
                    states[name] = state
                    del pending[name]
                    marker = "✓" if state == "COMPLETED" else "✗"
                    print(f"{marker} {name} (job {job_id}): {state}")
            if not pending:
                break
            if time.monotonic() >= deadline:
                self.cancel_jobs(pending.values())
                states.update({name: "TIMEOUT" for name in pending})
                break
            time.sleep(poll_interval)
        return states
