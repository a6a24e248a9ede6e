"""
Experiment runner
Executes one configured run (flat, static lifted, coarse-to-fine or
threshold baseline) and writes its trace, label map, optional partition
diagnostics and a key=value manifest. The manifest is written last,
through a rename, so a manifest on disk means every artifact it names exists.
"""
from __future__ import annotations

import csv
import logging
import os
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from joblib import Parallel, delayed

from liftedmap import __version__
from liftedmap.core.config import settings
from liftedmap.core.exceptions import ConfigError, InputError, InvariantViolation
from liftedmap.harness.compare import compare_traces, pixel_error
from liftedmap.inference.c2f import (
    C2FReport,
    LevelSolver,
    MRFLevelSolver,
    RefinementSchedule,
    run_c2f,
)
from liftedmap.io.netpbm import read_netpbm, scale_to_bytes, write_netpbm
from liftedmap.io.partitions import write_partition_diagnostics
from liftedmap.mrf.color_passing import CPSpec, cp, match_threshold, threshold_partition
from liftedmap.mrf.model import LabeledMRF
from liftedmap.mrf.partition import Partition
from liftedmap.pipelines.segmentation import CooperativeLevelSolver, SegmentationProblem
from liftedmap.pipelines.stereo import StereoProblem, build_stereo_mrf
from liftedmap.schemas.criteria import StoppingCriteria
from liftedmap.schemas.problems import SegmentationParams, StereoParams
from liftedmap.schemas.run import RunConfig
from liftedmap.solvers import SOLVERS
from liftedmap.solvers.trace import TraceRecorder

logger = logging.getLogger(__name__)

MANIFEST = "manifest.txt"
TRACE = "trace.csv"
MAP = "map.pgm"


@dataclass
class RunResult:
    """What a run left behind"""

    config: RunConfig
    report: C2FReport
    manifest: dict[str, str]
    artifacts: dict[str, Path] = field(default_factory=dict)
    wall_time: float = 0.0
    pixel_error: Optional[float] = None

    @property
    def final_energy(self) -> float:
        return self.report.energy


@dataclass
class _Task:
    """Model, level solver and output geometry for one configured run"""

    mrf: LabeledMRF
    solver: LevelSolver
    width: int
    height: int
    num_labels: int
    truth: Optional[np.ndarray] = None


def _load_task(config: RunConfig) -> _Task:
    if config.task == "stereo":
        left, right = read_netpbm(config.left), read_netpbm(config.right)
        problem = StereoProblem(left, right, StereoParams(max_disparity=config.max_disparity))
        mrf = build_stereo_mrf(problem)
        truth = read_netpbm(config.truth).astype(np.int64) if config.truth is not None else None
        if truth is not None and truth.shape != (problem.height, problem.width):
            raise InputError(f"Ground truth {truth.shape} does not match the images")
        return _Task(mrf, MRFLevelSolver(mrf, SOLVERS[config.solver]), problem.width, problem.height, config.num_labels, truth)

    image, seeds = read_netpbm(config.image), read_netpbm(config.seeds)
    if seeds.ndim != 2:
        raise InputError(f"Seed map {config.seeds} must be a grey PGM")
    params = SegmentationParams(num_labels=config.labels, num_color_bins=config.groups_bins, cell_size=config.cell)
    problem = SegmentationProblem(image, seeds, params)
    solver = CooperativeLevelSolver(problem)
    return _Task(solver.coloring_model, solver, problem.width, problem.height, config.num_labels)


def _schedule(config: RunConfig, task: _Task, criteria: StoppingCriteria) -> RefinementSchedule:
    levels: list[Union[CPSpec, Partition]] = config.level_specs(task.mrf.num_vars)
    if config.mode == "flat":
        return RefinementSchedule.flat(criteria)
    if config.mode == "threshold":
        if config.threshold is not None:
            partition = threshold_partition(task.mrf, config.threshold)
        else:
            target = next(spec for spec in levels if isinstance(spec, CPSpec))
            reference = cp(task.mrf, target.n_l, target.n_iter)
            _, partition = match_threshold(task.mrf, reference.num_elements)
        return RefinementSchedule([partition], criteria)
    return RefinementSchedule(levels, criteria)


def _write_manifest(directory: Path, entries: dict[str, str]) -> Path:
    path = directory / MANIFEST
    staging = directory / (MANIFEST + ".tmp")
    with open(staging, "w") as handle:
        for key, value in entries.items():
            handle.write(f"{key}={value}\n")
    os.replace(staging, path)
    return path


def read_manifest(path: Path) -> dict[str, str]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"Cannot read manifest {path}: {exc}") from exc
    return dict(line.split("=", 1) for line in lines if "=" in line)


def run(config: RunConfig) -> RunResult:
    """
    Execute one run and write its artifacts

    Raises:
        InputError: If inputs cannot be read or outputs cannot be written
        ConfigError: If the schedule does not fit the model
        InvariantViolation: If the trace energy ever increases
    """
    run_id = uuid.uuid4().hex[:12]
    started = time.monotonic()
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"Cannot create output directory {out}: {exc}") from exc

    task = _load_task(config)
    criteria = StoppingCriteria(no_improve_rounds=config.no_improve_rounds, count_unit=config.count_unit)
    schedule = _schedule(config, task, criteria)
    logger.info(
        f"Run {run_id}: {config.task} {config.mode} {schedule.describe()}",
        extra={"run_id": run_id, "mode": config.mode, "task": config.task},
    )

    artifacts: dict[str, Path] = {}
    handoff_errors: list[str] = []

    def on_level(index: int, partition: Optional[Partition], x: np.ndarray) -> None:
        if config.debug_partitions and partition is not None:
            written = write_partition_diagnostics(out, index, partition, task.width, task.height, config.seed)
            for path in written:
                artifacts[path.stem] = path
        if task.truth is not None:
            error = pixel_error(x.reshape(task.height, task.width), task.truth)
            handoff_errors.append(f"{index}:{error:.6f}")

    recorder = TraceRecorder()
    report = run_c2f(task.mrf, schedule, task.solver, global_budget=config.budget, recorder=recorder, on_level=on_level)
    if not report.trace.is_monotone(settings.DRIFT_TOLERANCE * max(1.0, abs(report.energy))):
        raise InvariantViolation("Run trace energy increased")
    wall_time = time.monotonic() - started

    labels = report.assignment.reshape(task.height, task.width)
    try:
        if config.write_trace:
            report.trace.write_csv(out / TRACE)
            artifacts["trace"] = out / TRACE
        artifacts["map"] = write_netpbm(out / MAP, scale_to_bytes(labels, task.num_labels))
    except OSError as exc:
        raise InputError(f"Cannot write results to {out}: {exc}") from exc

    final_error = pixel_error(labels, task.truth) if task.truth is not None else None
    manifest = {
        "run_id": run_id,
        "version": __version__,
        "task": config.task,
        "mode": config.mode,
        "solver": config.solver,
        "schedule": schedule.describe(),
        "k": str(criteria.no_improve_rounds),
        "count_unit": criteria.count_unit,
        "budget": "" if config.budget is None else repr(config.budget),
        "seed": str(config.seed),
        "num_vars": str(task.mrf.num_vars),
        "num_labels": str(task.num_labels),
        "final_energy": repr(report.energy),
        "stop_reason": report.stop_reason.value,
        "rounds": str(report.rounds),
        "wall_time": f"{wall_time:.6f}",
    }
    for level in report.levels:
        manifest[f"level{level.index}"] = (
            f"{level.description} elements={level.num_elements} energy_in={level.energy_in!r} "
            f"energy_out={level.energy_out!r} rounds={level.rounds} stop={level.stop_reason}"
        )
    if final_error is not None:
        manifest["pixel_error"] = f"{final_error:.6f}"
        manifest["handoff_pixel_error"] = " ".join(handoff_errors)
    for name, path in artifacts.items():
        manifest[f"artifact.{name}"] = path.name
    _write_manifest(out, manifest)

    logger.info(
        f"Run {run_id} finished",
        extra={"run_id": run_id, "energy": report.energy, "elapsed": wall_time, "stop_reason": report.stop_reason.value},
    )
    return RunResult(
        config=config,
        report=report,
        manifest=manifest,
        artifacts=artifacts,
        wall_time=wall_time,
        pixel_error=final_error,
    )


BENCH_HEADER = ("mode", "final_energy", "wall_time", "stop_reason", "dominance_vs_first", "strict_vs_first")


def bench(configs: list[RunConfig], out: Path, parallel: bool = False) -> list[RunResult]:
    """
    Run several configurations on the same inputs

    Sequential runs share no CPU time, so their traces are compared against
    the first run's. Parallel runs only report final energies.
    """
    if not configs:
        raise ConfigError("bench needs at least one configuration")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if parallel:
        jobs = min(len(configs), settings.MAX_PARALLEL_RUNS)
        results = Parallel(n_jobs=jobs)(delayed(run)(config) for config in configs)
    else:
        results = [run(config) for config in configs]

    reference = results[0].report.trace
    rows = []
    for result in results:
        dominance = strict = ""
        if not parallel:
            summary = compare_traces(result.report.trace, reference)
            dominance, strict = f"{summary.fraction:.6f}", f"{summary.strict_fraction:.6f}"
        rows.append(
            (
                result.config.mode,
                repr(result.final_energy),
                f"{result.wall_time:.6f}",
                result.report.stop_reason.value,
                dominance,
                strict,
            )
        )
    with open(out / "bench.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(BENCH_HEADER)
        writer.writerows(rows)
    logger.info(f"Bench of {len(results)} runs written to {out / 'bench.csv'}")
    return results
