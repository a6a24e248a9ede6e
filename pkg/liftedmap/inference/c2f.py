"""
Coarse-to-fine lifted MAP
Runs an anytime solver over successively finer reduced models, handing each
level's solution to the next with unchanged energy, and finishes on the
flat model.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from liftedmap.core.config import settings
from liftedmap.core.exceptions import ContractViolation, InvariantViolation, ScheduleError
from liftedmap.mrf.color_passing import (
    ColorPassingState,
    CPSpec,
    advance,
    init_colors,
    partition_from_colors,
)
from liftedmap.mrf.model import LabeledMRF, energy
from liftedmap.mrf.partition import Partition, build_reduced, expand, is_coarser, lift_assignment
from liftedmap.schemas.criteria import StoppingCriteria
from liftedmap.solvers.common import LabelCursor, SolveReport, StopReason
from liftedmap.solvers.expansion import alpha_expansion
from liftedmap.solvers.trace import AnytimeTrace, Deadline, TraceEvent, TraceRecorder

logger = logging.getLogger(__name__)

LevelSpec = Union[CPSpec, Partition]
Algorithm = Callable[..., SolveReport]
LevelCallback = Callable[[int, Optional[Partition], np.ndarray], None]


@dataclass(frozen=True)
class ScheduleLevel:
    """One coarse level: a CP spec or an explicit partition, with optional own criteria"""

    spec: LevelSpec
    criteria: Optional[StoppingCriteria] = None

    def describe(self) -> str:
        if isinstance(self.spec, CPSpec):
            return str(self.spec)
        return f"partition({self.spec.num_elements})"


class RefinementSchedule:
    """
    Ordered coarse levels, implicitly followed by the flat model

    CP levels must be non-decreasing in both N_L and N_iter, and consecutive
    explicit partitions must be nested. Nesting of the realized partitions
    is checked again at every transition.
    """

    def __init__(
        self,
        levels: Sequence[Union[LevelSpec, ScheduleLevel]] = (),
        criteria: Optional[StoppingCriteria] = None,
        final_criteria: Optional[StoppingCriteria] = None,
    ):
        self.levels = [lv if isinstance(lv, ScheduleLevel) else ScheduleLevel(lv) for lv in levels]
        self.criteria = criteria or StoppingCriteria()
        self.final_criteria = final_criteria or self.criteria
        self._check_order()

    @classmethod
    def flat(cls, criteria: Optional[StoppingCriteria] = None) -> "RefinementSchedule":
        """No coarse levels: C2F reduces to the plain solver"""
        return cls([], criteria)

    def _check_order(self) -> None:
        last_cp: Optional[CPSpec] = None
        last_partition: Optional[Partition] = None
        for level in self.levels:
            spec = level.spec
            if isinstance(spec, CPSpec):
                if last_cp is not None and (spec.n_l < last_cp.n_l or spec.n_iter < last_cp.n_iter):
                    raise ScheduleError(f"{spec} cannot follow {last_cp}: CP levels must only refine")
                last_cp = spec
            elif isinstance(spec, Partition):
                if last_partition is not None:
                    if spec.num_vars != last_partition.num_vars or not is_coarser(last_partition, spec):
                        raise ScheduleError("Explicit partitions in the schedule are not nested")
                last_partition = spec
            else:
                raise ScheduleError(f"Unsupported schedule level {spec!r}")

    def criteria_for(self, index: int) -> StoppingCriteria:
        if index >= len(self.levels):
            return self.final_criteria
        return self.levels[index].criteria or self.criteria

    def describe(self) -> str:
        return " -> ".join([level.describe() for level in self.levels] + ["flat"])

    def __len__(self) -> int:
        return len(self.levels) + 1


def get_init_state(model: LabeledMRF) -> np.ndarray:
    """Per-variable argmin of the unary table, ties to the lowest label"""
    return np.argmin(model.unaries, axis=1).astype(np.int64)


class LevelSolver(ABC):
    """
    What the driver needs at every level

    A partition of None stands for the flat model.
    """

    @property
    @abstractmethod
    def coloring_model(self) -> LabeledMRF:
        """Model color passing runs on"""

    @abstractmethod
    def level_energy(self, partition: Optional[Partition], y: np.ndarray) -> float:
        """Objective value of a level assignment"""

    @abstractmethod
    def initial_assignment(self, partition: Optional[Partition]) -> np.ndarray:
        """Starting assignment of the first level"""

    @abstractmethod
    def solve(
        self,
        partition: Optional[Partition],
        start: np.ndarray,
        criteria: StoppingCriteria,
        recorder: TraceRecorder,
        level: int,
        deadline: Deadline,
        cursor: Optional[LabelCursor] = None,
    ) -> SolveReport:
        """Run the anytime solver on one level without writing start/stop rows"""


class MRFLevelSolver(LevelSolver):
    """Runs a plain MRF algorithm on reduced models of a fixed MRF"""

    def __init__(self, mrf: LabeledMRF, algorithm: Algorithm = alpha_expansion):
        self.mrf = mrf
        self.algorithm = algorithm
        self._cache: dict[Partition, LabeledMRF] = {}

    @property
    def coloring_model(self) -> LabeledMRF:
        return self.mrf

    def level_model(self, partition: Optional[Partition]) -> LabeledMRF:
        """Reduced model of the partition; the input MRF itself when flat"""
        if partition is None or partition.is_degenerate:
            return self.mrf
        if partition not in self._cache:
            # one entry is enough: levels are visited once, in order
            self._cache.clear()
            self._cache[partition] = build_reduced(self.mrf, partition).model
        return self._cache[partition]

    def level_energy(self, partition, y):
        return energy(self.level_model(partition), y)

    def initial_assignment(self, partition):
        return get_init_state(self.level_model(partition))

    def solve(self, partition, start, criteria, recorder, level, deadline, cursor=None):
        return self.algorithm(
            self.level_model(partition),
            start,
            criteria,
            trace_sink=recorder,
            level=level,
            standalone=False,
            deadline=deadline,
            cursor=cursor,
        )


@dataclass
class LevelSummary:
    """Per-level outcome kept for manifests and logs"""

    index: int
    description: str
    num_elements: int
    energy_in: float
    energy_out: float
    rounds: int
    stop_reason: str


@dataclass
class C2FReport(SolveReport):
    """SolveReport plus the per-level breakdown"""

    levels: list[LevelSummary] = field(default_factory=list)


class _PartitionLineage:
    """Realizes schedule levels lazily, extending one color-passing state"""

    def __init__(self, mrf: LabeledMRF):
        self.mrf = mrf
        self.state: Optional[ColorPassingState] = None

    def realize(self, spec: LevelSpec) -> Partition:
        if isinstance(spec, Partition):
            if spec.num_vars != self.mrf.num_vars:
                raise ScheduleError(f"Partition covers {spec.num_vars} variables, model has {self.mrf.num_vars}")
            return spec
        if spec.n_l > self.mrf.num_labels:
            raise ScheduleError(f"{spec} needs N_L <= |L| = {self.mrf.num_labels}")
        if self.state is None:
            self.state = init_colors(self.mrf, spec.n_l)
        try:
            self.state = advance(self.state, self.mrf, spec)
        except ContractViolation as exc:
            raise ScheduleError(str(exc)) from exc
        return partition_from_colors(self.state)


def _check_handoff(before: float, after: float, index: int) -> None:
    """
    Hand-offs must keep the energy

    The tolerance is relative: HANDOFF_TOLERANCE times max(1, |before|).
    """
    if abs(after - before) > settings.HANDOFF_TOLERANCE * max(1.0, abs(before)):
        raise InvariantViolation(
            f"Hand-off into level {index} changed the energy from {before!r} to {after!r}"
        )


def run_c2f(
    mrf: LabeledMRF,
    schedule: RefinementSchedule,
    solver: Union[LevelSolver, Algorithm] = alpha_expansion,
    global_budget: Optional[float] = None,
    recorder: Optional[TraceRecorder] = None,
    on_level: Optional[LevelCallback] = None,
) -> C2FReport:
    """
    Coarse-to-fine lifted MAP inference

    Args:
        mrf: Model to minimise (the model color passing runs on when solver is a LevelSolver)
        schedule: Coarse levels and their criteria
        solver: A LevelSolver, or an MRF algorithm such as alpha_expansion or icm
        global_budget: Wall-clock seconds for the whole run; pre-emption returns the
            expansion of the best assignment so far
        recorder: Shared trace recorder (a private one otherwise)
        on_level: Called as on_level(index, partition, flat_assignment) when a level starts

    Returns:
        C2FReport whose assignment is always a flat-model assignment

    Raises:
        ScheduleError: If a realized level is not finer than its predecessor
        InvariantViolation: If a hand-off changes the energy
    """
    level_solver = solver if isinstance(solver, LevelSolver) else MRFLevelSolver(mrf, solver)
    recorder = recorder or TraceRecorder()
    first_row = len(recorder.trace)
    deadline = Deadline(recorder, global_budget)
    lineage = _PartitionLineage(level_solver.coloring_model)
    num_vars = mrf.num_vars
    logger.info(f"Starting C2F run: {schedule.describe()}", extra={"mode": "c2f"})

    summaries: list[LevelSummary] = []
    previous: Optional[Partition] = None
    partition: Optional[Partition] = None
    cursor: Optional[LabelCursor] = None
    y = np.zeros(0, dtype=np.int64)
    value = 0.0
    rounds = 0
    reason = StopReason.CONVERGED

    for index in range(len(schedule)):
        final = index == len(schedule) - 1
        partition = None if final else lineage.realize(schedule.levels[index].spec)
        realized = partition if partition is not None else Partition.degenerate(num_vars)

        if previous is None:
            y = level_solver.initial_assignment(partition)
            value = level_solver.level_energy(partition, y)
            recorder.record(value, TraceEvent.START, index)
        else:
            if not is_coarser(previous, realized):
                raise ScheduleError(f"Level {index} ({realized.num_elements} elements) is not finer than level {index - 1}")
            y = lift_assignment(previous, realized, y)
            handed = level_solver.level_energy(partition, y)
            _check_handoff(value, handed, index)
            value = handed
            recorder.record(value, TraceEvent.REFINE, index)
            logger.info(
                f"Refined to level {index}",
                extra={"level_index": index, "num_elements": realized.num_elements, "energy": value},
            )

        if on_level is not None:
            on_level(index, partition, expand(realized, y))

        description = "flat" if final else schedule.levels[index].describe()
        if deadline.expired():
            reason = StopReason.BUDGET
            summaries.append(LevelSummary(index, description, realized.num_elements, value, value, 0, reason.value))
            previous = realized
            break

        # the label rotation carries over; quiet moves only count on an unchanged model
        if cursor is not None and previous is not None and previous != realized:
            cursor = LabelCursor(cursor.next_label)
        report = level_solver.solve(partition, y, schedule.criteria_for(index), recorder, index, deadline, cursor)
        cursor = report.cursor
        summaries.append(
            LevelSummary(
                index, description, realized.num_elements, value, report.energy, report.rounds, report.stop_reason.value
            )
        )
        y, value = report.assignment, report.energy
        rounds += report.rounds
        reason = report.stop_reason
        previous = realized
        if deadline.expired():
            reason = StopReason.BUDGET
            break

    x = expand(previous, y)
    recorder.record(value, TraceEvent.STOP, len(summaries) - 1)
    logger.info(
        "C2F run finished",
        extra={"mode": "c2f", "energy": value, "rounds": rounds, "stop_reason": reason.value},
    )
    return C2FReport(
        assignment=x,
        energy=value,
        trace=AnytimeTrace(recorder.trace.rows[first_row:]),
        rounds=rounds,
        stop_reason=reason,
        levels=summaries,
    )


def run_static_lifted(
    mrf: LabeledMRF,
    partition: LevelSpec,
    solver: Union[LevelSolver, Algorithm] = alpha_expansion,
    budget: Optional[float] = None,
    criteria: Optional[StoppingCriteria] = None,
    recorder: Optional[TraceRecorder] = None,
    on_level: Optional[LevelCallback] = None,
) -> C2FReport:
    """Solve one fixed reduced model, then finish on the flat model"""
    schedule = RefinementSchedule([partition], criteria)
    return run_c2f(mrf, schedule, solver, global_budget=budget, recorder=recorder, on_level=on_level)
