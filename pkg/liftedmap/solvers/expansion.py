"""
Alpha expansion
Each move lets every variable either keep its label or switch to alpha;
the binary choice is solved exactly by a minimum cut when its pairwise
terms are submodular.
"""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from liftedmap.mrf.model import LabeledMRF
from liftedmap.schemas.criteria import StoppingCriteria
from liftedmap.solvers.common import (
    EnergyTracker,
    ImprovementCounter,
    LabelCursor,
    SolveReport,
    StopReason,
    energy_delta,
)
from liftedmap.solvers.maxflow import FlowNetwork, max_flow
from liftedmap.solvers.trace import AnytimeTrace, Deadline, TraceEvent, TraceRecorder

logger = logging.getLogger(__name__)


def expansion_network(model: LabeledMRF, x: np.ndarray, alpha: int) -> tuple[FlowNetwork, np.ndarray]:
    """
    Cut network of the alpha-move from x

    Only variables not already at alpha become nodes. A node ending on the
    sink side switches to alpha. Non-submodular pairs are made submodular by
    raising psi(alpha, x_j).

    Returns:
        (network, active) where active[k] is the variable behind node k
    """
    active = np.flatnonzero(x != alpha)
    k = len(active)
    node = np.full(model.num_vars, -1, dtype=np.int64)
    node[active] = np.arange(k)
    keep_cost = model.unaries[active, x[active]].copy()
    switch_cost = model.unaries[active, alpha].copy()

    heads, tails = model.heads, model.tails
    head_active = x[heads] != alpha
    tail_active = x[tails] != alpha
    alphas = np.full(model.num_edges, alpha, dtype=np.int64)

    only_head = np.flatnonzero(head_active & ~tail_active)
    if only_head.size:
        np.add.at(keep_cost, node[heads[only_head]], model.pairwise.cost(only_head, x[heads[only_head]], alphas[only_head]))
        np.add.at(switch_cost, node[heads[only_head]], model.pairwise.cost(only_head, alphas[only_head], alphas[only_head]))
    only_tail = np.flatnonzero(~head_active & tail_active)
    if only_tail.size:
        np.add.at(keep_cost, node[tails[only_tail]], model.pairwise.cost(only_tail, alphas[only_tail], x[tails[only_tail]]))
        np.add.at(switch_cost, node[tails[only_tail]], model.pairwise.cost(only_tail, alphas[only_tail], alphas[only_tail]))

    both = np.flatnonzero(head_active & tail_active)
    arc_from = np.zeros(0, dtype=np.int64)
    arc_to = np.zeros(0, dtype=np.int64)
    arc_cap = np.zeros(0)
    if both.size:
        xh, xt, al = x[heads[both]], x[tails[both]], alphas[both]
        keep_keep = model.pairwise.cost(both, xh, xt)
        keep_switch = model.pairwise.cost(both, xh, al)
        switch_keep = model.pairwise.cost(both, al, xt)
        switch_switch = model.pairwise.cost(both, al, al)
        excess = keep_keep + switch_switch - keep_switch - switch_keep
        violated = excess > 0
        if np.any(violated):
            logger.debug("Truncating %d non-submodular pairs for alpha=%d", int(violated.sum()), alpha)
            switch_keep = switch_keep + np.where(violated, excess, 0.0)
        h_node, t_node = node[heads[both]], node[tails[both]]
        np.add.at(switch_cost, h_node, switch_keep - keep_keep)
        np.add.at(switch_cost, t_node, switch_switch - switch_keep)
        coupling = keep_switch + switch_keep - keep_keep - switch_switch
        positive = coupling > 0
        arc_from, arc_to, arc_cap = h_node[positive], t_node[positive], coupling[positive]

    source, sink = k, k + 1
    margin = switch_cost - keep_cost
    to_switch = margin > 0
    to_keep = margin < 0
    nodes = np.arange(k)
    network = FlowNetwork(
        num_nodes=k + 2,
        arc_from=np.concatenate([arc_from, np.full(int(to_switch.sum()), source), nodes[to_keep]]),
        arc_to=np.concatenate([arc_to, nodes[to_switch], np.full(int(to_keep.sum()), sink)]),
        capacity=np.concatenate([arc_cap, margin[to_switch], -margin[to_keep]]),
        source=source,
        sink=sink,
    )
    return network, active


def _move(model: LabeledMRF, x: np.ndarray, alpha: int) -> tuple[np.ndarray, float]:
    """Best alpha-move from x and its energy change (never positive)"""
    network, active = expansion_network(model, x, alpha)
    if active.size == 0:
        return x, 0.0
    _, source_side = max_flow(network)
    switched = active[~source_side[: len(active)]]
    if switched.size == 0:
        return x, 0.0
    candidate = x.copy()
    candidate[switched] = alpha
    delta = energy_delta(model, x, candidate)
    if delta > 0:
        # truncated pairs can mislead the cut; keep the input
        logger.debug("Rejected alpha=%d move raising energy by %.3g", alpha, delta)
        return x, 0.0
    return candidate, delta


def alpha_expansion_move(model: LabeledMRF, x, alpha: int) -> np.ndarray:
    """
    Optimal keep-or-switch-to-alpha move from x

    The returned assignment never has higher energy than x.
    """
    x = model.check_assignment(x).copy()
    return _move(model, x, int(alpha))[0]


def alpha_expansion(
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
    Anytime alpha expansion

    Cycles alpha over 0..|L|-1, recording the energy after every move.
    Stops when the criteria are met, the budget runs out, or |L| moves in a
    row change nothing. In "cycle" counting each wrap of alpha back to 0
    closes one improvement attempt.

    Args:
        model: Flat or reduced model
        start: Starting assignment
        criteria: Stopping criteria for this run
        trace_sink: Recorder shared with the caller (a private one otherwise)
        level: Partition level written to trace rows
        standalone: Record "start" and "stop" rows (false when a driver owns the trace)
        deadline: Outer deadline (global C2F budget), combined with the criteria budget
        cursor: Label rotation to resume from (a previous report's cursor)
    """
    recorder = trace_sink or TraceRecorder()
    first_row = len(recorder.trace)
    tracker = EnergyTracker(model, model.check_assignment(start))
    budget = Deadline(recorder, criteria.wall_clock_budget)
    counter = ImprovementCounter(criteria, tracker.value)
    if standalone:
        recorder.record(tracker.value, TraceEvent.START, level)

    def out_of_time() -> bool:
        return budget.expired() or (deadline is not None and deadline.expired())

    num_labels = model.num_labels
    cursor = cursor or LabelCursor()
    alpha = cursor.next_label % num_labels
    quiet = cursor.quiet_moves
    moves = 0
    reason = StopReason.CONVERGED
    while quiet < num_labels:
        if out_of_time():
            reason = StopReason.BUDGET
            break
        candidate, delta = _move(model, tracker.x, alpha)
        if -delta > criteria.energy_tolerance:
            tracker.accept(candidate, delta)
            quiet = 0
        else:
            quiet += 1
        moves += 1
        recorder.record(tracker.value, TraceEvent.MOVE, level)
        logger.debug("alpha=%d energy=%.6f", alpha, tracker.value)
        alpha = (alpha + 1) % num_labels
        closes_attempt = criteria.count_unit == "move" or alpha == 0
        if closes_attempt and counter.attempt(tracker.value):
            reason = StopReason.CRITERIA
            break

    tracker.resync()
    if standalone:
        recorder.record(tracker.value, TraceEvent.STOP, level)
    logger.info(
        "Alpha expansion stopped",
        extra={"energy": tracker.value, "rounds": moves, "stop_reason": reason.value, "level_index": level},
    )
    return SolveReport(
        assignment=tracker.x,
        energy=tracker.value,
        trace=AnytimeTrace(recorder.trace.rows[first_row:]),
        rounds=moves,
        stop_reason=reason,
        cursor=LabelCursor(alpha, quiet),
    )
