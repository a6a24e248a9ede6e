"""
Iterated conditional modes
Baseline anytime minimiser: sweeps variables in index order, moving each to
its best label given its neighbours.
"""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from liftedmap.mrf.model import LabeledMRF, energy
from liftedmap.schemas.criteria import StoppingCriteria
from liftedmap.solvers.common import ImprovementCounter, LabelCursor, SolveReport, StopReason
from liftedmap.solvers.trace import AnytimeTrace, Deadline, TraceEvent, TraceRecorder

logger = logging.getLogger(__name__)


def _sweep(model: LabeledMRF, x: np.ndarray) -> int:
    """One in-place best-response sweep; returns the number of changed variables"""
    offsets, edge_ids, is_head = model.incidence
    other_end = np.where(is_head, model.tails[edge_ids], model.heads[edge_ids])
    changed = 0
    for i in range(model.num_vars):
        costs = model.unaries[i].copy()
        lo, hi = offsets[i], offsets[i + 1]
        if hi > lo:
            edges = edge_ids[lo:hi]
            costs += model.pairwise.rows(edges, x[other_end[lo:hi]], is_head[lo:hi], model.num_labels).sum(axis=0)
        best = int(np.argmin(costs))
        if costs[best] < costs[x[i]]:
            x[i] = best
            changed += 1
    return changed


def icm(
    model: LabeledMRF,
    start,
    criteria: StoppingCriteria,
    trace_sink: Optional[TraceRecorder] = None,
    level: int = 0,
    standalone: bool = True,
    deadline: Optional[Deadline] = None,
    cursor: Optional[LabelCursor] = None,
) -> SolveReport:
    """
    Anytime ICM

    Each sweep is one improvement attempt. Stops on the criteria, the
    budget, or a sweep that changes nothing. Sweeps have no label order,
    so a cursor is accepted and ignored.
    """
    recorder = trace_sink or TraceRecorder()
    first_row = len(recorder.trace)
    x = model.check_assignment(start).copy()
    value = energy(model, x)
    budget = Deadline(recorder, criteria.wall_clock_budget)
    counter = ImprovementCounter(criteria, value)
    if standalone:
        recorder.record(value, TraceEvent.START, level)

    sweeps = 0
    while True:
        if budget.expired() or (deadline is not None and deadline.expired()):
            reason = StopReason.BUDGET
            break
        changed = _sweep(model, x)
        sweeps += 1
        value = energy(model, x)
        recorder.record(value, TraceEvent.MOVE, level)
        if changed == 0:
            reason = StopReason.CONVERGED
            break
        if counter.attempt(value):
            reason = StopReason.CRITERIA
            break

    if standalone:
        recorder.record(value, TraceEvent.STOP, level)
    logger.info(
        "ICM stopped",
        extra={"energy": value, "rounds": sweeps, "stop_reason": reason.value, "level_index": level},
    )
    return SolveReport(
        assignment=x,
        energy=value,
        trace=AnytimeTrace(recorder.trace.rows[first_row:]),
        rounds=sweeps,
        stop_reason=reason,
    )
