"""
Shared solver plumbing
Solve reports, stop reasons, incremental energy tracking and the
no-improvement counter behind every stopping criterion.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from liftedmap.core.config import settings
from liftedmap.mrf.model import LabeledMRF, energy
from liftedmap.schemas.criteria import StoppingCriteria
from liftedmap.solvers.trace import AnytimeTrace

logger = logging.getLogger(__name__)


class StopReason(str, Enum):
    CRITERIA = "criteria-met"
    BUDGET = "budget"
    CONVERGED = "converged"


@dataclass(frozen=True)
class LabelCursor:
    """Where a label-cycling solver left off: the next alpha and the moves since the last change"""

    next_label: int = 0
    quiet_moves: int = 0


@dataclass
class SolveReport:
    """Outcome of one solver run (or one C2F run)"""

    assignment: np.ndarray
    energy: float
    trace: AnytimeTrace
    rounds: int
    stop_reason: StopReason
    cursor: LabelCursor = field(default_factory=LabelCursor)


def incident_edges(model: LabeledMRF, variables: np.ndarray) -> np.ndarray:
    """Sorted ids of all edges touching any of the given variables"""
    offsets, edge_ids, _ = model.incidence
    if variables.size == 0:
        return np.zeros(0, dtype=np.int64)
    starts = offsets[variables]
    counts = offsets[variables + 1] - starts
    positions = np.repeat(starts - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts) + np.arange(counts.sum())
    return np.unique(edge_ids[positions])


def energy_delta(model: LabeledMRF, old: np.ndarray, new: np.ndarray) -> float:
    """energy(new) - energy(old), touching only changed variables and their edges"""
    changed = np.flatnonzero(old != new)
    if changed.size == 0:
        return 0.0
    edges = incident_edges(model, changed)
    heads, tails = model.heads[edges], model.tails[edges]
    gained = np.concatenate(
        [model.unaries[changed, new[changed]], model.pairwise.cost(edges, new[heads], new[tails])]
    )
    lost = np.concatenate(
        [model.unaries[changed, old[changed]], model.pairwise.cost(edges, old[heads], old[tails])]
    )
    return math.fsum(gained.tolist()) - math.fsum(lost.tolist())


class EnergyTracker:
    """
    Delta-tracked energy of the current assignment

    Every DRIFT_CHECK_INTERVAL accepted moves the tracked value is compared
    with a full evaluation and resynchronised if it drifted.
    """

    def __init__(self, model: LabeledMRF, x: np.ndarray):
        self.model = model
        self.x = np.array(x, dtype=np.int64)
        self.value = energy(model, self.x)
        self._moves = 0

    def accept(self, new_x: np.ndarray, delta: float) -> None:
        self.x = new_x
        self.value += delta
        self._moves += 1
        if self._moves % settings.DRIFT_CHECK_INTERVAL == 0:
            self.resync()

    def resync(self) -> None:
        exact = energy(self.model, self.x)
        drift = abs(exact - self.value)
        if drift > settings.DRIFT_TOLERANCE * max(1.0, abs(exact)):
            logger.warning("Tracked energy drifted by %.3g; resynchronising", drift)
        self.value = exact


class ImprovementCounter:
    """
    Counts consecutive improvement attempts that failed to lower the energy

    An attempt improves when it gains more than the energy tolerance and
    more than min_relative_gain of the energy it started from.
    """

    def __init__(self, criteria: StoppingCriteria, energy_at_start: float):
        self.criteria = criteria
        self.reference = energy_at_start
        self.stale = 0

    def required_gain(self) -> float:
        return max(self.criteria.energy_tolerance, self.criteria.min_relative_gain * abs(self.reference))

    def attempt(self, current: float) -> bool:
        """Close one attempt; True once K attempts in a row brought no improvement"""
        if self.reference - current > self.required_gain():
            self.stale = 0
        else:
            self.stale += 1
        self.reference = current
        limit = self.criteria.no_improve_rounds
        return limit is not None and self.stale >= limit
