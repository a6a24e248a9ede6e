"""
Trace comparison
Anytime dominance of one energy-vs-time trace over another, normalised
curves, time-to-quality and pixel error.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

import numpy as np

from liftedmap.core.config import settings
from liftedmap.core.exceptions import ContractViolation
from liftedmap.solvers.trace import AnytimeTrace

logger = logging.getLogger(__name__)

SUMMARY_HEADER = ("elapsed_seconds", "energy_a", "energy_b", "normalized_a", "normalized_b")


def energy_at(trace: AnytimeTrace, times) -> np.ndarray:
    """Step-function energy: the last value recorded at or before each time, +inf before the first"""
    recorded = np.array(trace.times)
    energies = np.array(trace.energies)
    index = np.searchsorted(recorded, np.asarray(times, dtype=np.float64), side="right") - 1
    values = np.full(index.shape, math.inf)
    started = index >= 0
    values[started] = energies[index[started]]
    return values


def sampling_grid(
    a: AnytimeTrace,
    b: AnytimeTrace,
    points: Optional[int] = None,
    kind: Literal["log", "random"] = "log",
    seed: Optional[int] = None,
) -> np.ndarray:
    """
    Sample times between the first and last record of either trace

    "log" spaces points geometrically; "random" draws them uniformly with
    a seeded generator and sorts them.
    """
    points = points or settings.DOMINANCE_GRID_POINTS
    start = min(a.times[0], b.times[0])
    end = max(a.times[-1], b.times[-1])
    if kind == "random":
        rng = np.random.default_rng(settings.DEFAULT_SEED if seed is None else seed)
        return np.sort(rng.uniform(start, end, size=points))
    if end <= start:
        return np.full(points, end)
    low = start if start > 0 else min(end * 1e-6, (end - start) / points)
    return np.geomspace(low, end, points)


def normalized(energies: np.ndarray, initial: float, best: float) -> np.ndarray:
    """(E - best) / (initial - best); zero when the two coincide"""
    span = initial - best
    if not math.isfinite(span) or span <= 0:
        return np.where(np.isfinite(energies), 0.0, math.inf)
    return (energies - best) / span


def time_to_within(trace: AnytimeTrace, target: float, percent: float) -> Optional[float]:
    """First elapsed time with energy within percent% of target, None if never"""
    bound = target + abs(target) * percent / 100.0
    for row in trace:
        if row.energy <= bound:
            return row.elapsed
    return None


@dataclass
class DominanceSummary:
    """
    Comparison of trace a against trace b on one sampling grid

    fraction counts sampled times with energy_a <= energy_b,
    strict_fraction those with energy_a < energy_b. Times where either trace
    has not started are left out.
    """

    grid: np.ndarray
    energy_a: np.ndarray
    energy_b: np.ndarray
    normalized_a: np.ndarray
    normalized_b: np.ndarray
    fraction: float
    strict_fraction: float
    best_final: float
    within_percent: float
    time_to_within_a: Optional[float]
    time_to_within_b: Optional[float]

    @property
    def num_samples(self) -> int:
        return int(np.sum(np.isfinite(self.energy_a) & np.isfinite(self.energy_b)))

    def as_dict(self) -> dict[str, object]:
        return {
            "dominance_fraction": self.fraction,
            "strict_fraction": self.strict_fraction,
            "samples": self.num_samples,
            "best_final_energy": self.best_final,
            "within_percent": self.within_percent,
            "time_to_within_a": self.time_to_within_a,
            "time_to_within_b": self.time_to_within_b,
        }

    def write_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(SUMMARY_HEADER)
            for row in zip(self.grid, self.energy_a, self.energy_b, self.normalized_a, self.normalized_b):
                writer.writerow([f"{row[0]:.6f}", *(repr(float(v)) for v in row[1:])])


def compare_traces(
    a: AnytimeTrace,
    b: AnytimeTrace,
    points: Optional[int] = None,
    kind: Literal["log", "random"] = "log",
    seed: Optional[int] = None,
    within_percent: float = 1.0,
) -> DominanceSummary:
    """
    Anytime dominance of a over b

    Raises:
        ContractViolation: If either trace is empty
    """
    if len(a) == 0 or len(b) == 0:
        raise ContractViolation("compare_traces needs two non-empty traces")
    grid = sampling_grid(a, b, points, kind, seed)
    energy_a, energy_b = energy_at(a, grid), energy_at(b, grid)
    valid = np.isfinite(energy_a) & np.isfinite(energy_b)
    if np.any(valid):
        fraction = float(np.mean(energy_a[valid] <= energy_b[valid]))
        strict = float(np.mean(energy_a[valid] < energy_b[valid]))
    else:
        fraction = strict = 0.0

    best = min(a.final_energy, b.final_energy)
    initial = max(a.energies[0], b.energies[0])
    summary = DominanceSummary(
        grid=grid,
        energy_a=energy_a,
        energy_b=energy_b,
        normalized_a=normalized(energy_a, initial, best),
        normalized_b=normalized(energy_b, initial, best),
        fraction=fraction,
        strict_fraction=strict,
        best_final=best,
        within_percent=within_percent,
        time_to_within_a=time_to_within(a, best, within_percent),
        time_to_within_b=time_to_within(b, best, within_percent),
    )
    logger.info(f"Dominance {fraction:.3f} (strict {strict:.3f}) over {int(valid.sum())} samples")
    return summary


def pixel_error(pred, truth, tolerance: int = 1) -> float:
    """
    Fraction of pixels whose label is off by more than tolerance

    Raises:
        ContractViolation: If the maps differ in shape
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ContractViolation(f"Prediction {pred.shape} and truth {truth.shape} differ in shape")
    if pred.size == 0:
        return 0.0
    return float(np.mean(np.abs(pred - truth) > tolerance))
