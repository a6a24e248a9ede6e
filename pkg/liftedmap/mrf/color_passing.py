"""
Color passing
Approximate-symmetry partitions of an MRF's variables.

Variables start with one shared color. Unary potential nodes are colored by
the order of their N_L lowest-energy labels, pairwise nodes by exact
equality of their potentials. Each round refines variable colors from the
colors of the potentials around them, so partitions only ever get finer.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Optional

import numpy as np

from liftedmap.core.exceptions import ContractViolation
from liftedmap.mrf.model import LabeledMRF
from liftedmap.mrf.partition import Partition, canonical_ids

logger = logging.getLogger(__name__)

# Argument-slot tags for pairwise messages; symmetric tables use one slot
SLOT_HEAD, SLOT_TAIL, SLOT_SYMMETRIC = 0, 1, 2


@dataclass(frozen=True)
class ColorPassingState:
    """
    Immutable color-passing snapshot

    Colors of each node kind are dense integers in first-seen order.
    """

    var_colors: np.ndarray
    unary_colors: np.ndarray
    pair_colors: np.ndarray
    n_l: int
    n_iter: int
    next_color: int

    @property
    def num_var_colors(self) -> int:
        return int(self.var_colors.max()) + 1 if self.var_colors.size else 0


@dataclass(frozen=True)
class CPSpec:
    """CP(N_L, N_iter) parameters"""

    n_l: int
    n_iter: int

    def __post_init__(self):
        if self.n_l < 1 or self.n_iter < 0:
            raise ContractViolation(f"CP({self.n_l}, {self.n_iter}) needs N_L >= 1 and N_iter >= 0")

    def __str__(self) -> str:
        return f"CP({self.n_l},{self.n_iter})"


def unary_orders(mrf: LabeledMRF) -> np.ndarray:
    """Labels of each variable sorted by unary energy, ties by label index"""
    return np.argsort(mrf.unaries, axis=1, kind="stable")


def unary_signatures(mrf: LabeledMRF, n_l: int) -> np.ndarray:
    """The n_l lowest-energy labels of every variable, best first"""
    return unary_orders(mrf)[:, :n_l]


def _densify_rows(rows: np.ndarray) -> np.ndarray:
    """Equal rows get equal colors, numbered in order of first occurrence"""
    rows = np.asarray(rows)
    if rows.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    _, inverse = np.unique(rows, axis=0, return_inverse=True)
    return canonical_ids(inverse)


def _densify_keys(keys: Iterable[Hashable]) -> np.ndarray:
    seen: dict[Hashable, int] = {}
    return np.array([seen.setdefault(key, len(seen)) for key in keys], dtype=np.int64)


def _freeze(*arrays: np.ndarray) -> None:
    for array in arrays:
        array.setflags(write=False)


def _next_color(*colors: np.ndarray) -> int:
    return max((int(c.max()) + 1 for c in colors if c.size), default=0)


def init_colors(mrf: LabeledMRF, n_l: int) -> ColorPassingState:
    """
    Initial coloring with unary split threshold n_l

    Raises:
        ContractViolation: If n_l is outside 1..|L|
    """
    if not 1 <= n_l <= mrf.num_labels:
        raise ContractViolation(f"N_L must lie in 1..{mrf.num_labels}, got {n_l}")
    var_colors = np.zeros(mrf.num_vars, dtype=np.int64)
    unary_colors = _densify_rows(unary_signatures(mrf, n_l))
    pair_colors = _densify_keys(mrf.pairwise.color_keys())
    _freeze(var_colors, unary_colors, pair_colors)
    return ColorPassingState(
        var_colors=var_colors,
        unary_colors=unary_colors,
        pair_colors=pair_colors,
        n_l=n_l,
        n_iter=0,
        next_color=_next_color(var_colors, unary_colors, pair_colors),
    )


def color_passing_round(state: ColorPassingState, mrf: LabeledMRF) -> ColorPassingState:
    """
    One synchronous round: variables -> potentials -> variables

    A variable's new color is determined by its old color, its unary node's
    color and the sorted (pairwise color, argument slot) messages it receives.
    """
    if state.var_colors.shape != (mrf.num_vars,) or state.pair_colors.shape != (mrf.num_edges,):
        raise ContractViolation("Color-passing state does not match the model")
    colors = state.var_colors

    unary_colors = _densify_rows(np.stack([state.unary_colors, colors], axis=1))

    symmetric = mrf.pairwise.symmetric()
    head_colors = colors[mrf.heads]
    tail_colors = colors[mrf.tails]
    first = np.where(symmetric, np.minimum(head_colors, tail_colors), head_colors)
    second = np.where(symmetric, np.maximum(head_colors, tail_colors), tail_colors)
    pair_colors = _densify_rows(np.stack([state.pair_colors, first, second], axis=1))

    offsets, edge_ids, is_head = mrf.incidence
    slots = np.where(symmetric[edge_ids], SLOT_SYMMETRIC, np.where(is_head, SLOT_HEAD, SLOT_TAIL))
    messages = pair_colors[edge_ids] * 3 + slots
    owner = np.repeat(np.arange(mrf.num_vars), np.diff(offsets))
    order = np.lexsort((messages, owner))
    messages = messages[order]

    signatures = (
        (int(colors[i]), int(unary_colors[i]), tuple(messages[offsets[i]:offsets[i + 1]].tolist()))
        for i in range(mrf.num_vars)
    )
    var_colors = _densify_keys(signatures)
    _freeze(var_colors, unary_colors, pair_colors)

    logger.debug(
        "Color passing round %d: %d variable colors", state.n_iter + 1, int(var_colors.max()) + 1 if var_colors.size else 0
    )
    return ColorPassingState(
        var_colors=var_colors,
        unary_colors=unary_colors,
        pair_colors=pair_colors,
        n_l=state.n_l,
        n_iter=state.n_iter + 1,
        next_color=_next_color(var_colors, unary_colors, pair_colors),
    )


def partition_from_colors(state: ColorPassingState) -> Partition:
    """Variables sharing a color form one lifted pixel"""
    return Partition(state.var_colors)


def split_by_next_label(state: ColorPassingState, mrf: LabeledMRF) -> ColorPassingState:
    """
    Raise N_L by one and split every color group by the next-best label

    Before the first round only the unary colors split: variables keep their
    shared color, so the result matches init_colors at N_L + 1.

    Raises:
        ContractViolation: If N_L already equals |L|
    """
    if state.n_l >= mrf.num_labels:
        raise ContractViolation(f"N_L is already {state.n_l} = |L|; nothing left to split on")
    next_label = unary_orders(mrf)[:, state.n_l]
    if state.n_iter == 0:
        var_colors = np.array(state.var_colors)
    else:
        var_colors = _densify_rows(np.stack([state.var_colors, next_label], axis=1))
    unary_colors = _densify_rows(np.stack([state.unary_colors, next_label], axis=1))
    pair_colors = np.array(state.pair_colors)
    _freeze(var_colors, unary_colors, pair_colors)
    return ColorPassingState(
        var_colors=var_colors,
        unary_colors=unary_colors,
        pair_colors=pair_colors,
        n_l=state.n_l + 1,
        n_iter=state.n_iter,
        next_color=_next_color(var_colors, unary_colors, pair_colors),
    )


def advance(state: ColorPassingState, mrf: LabeledMRF, target: CPSpec) -> ColorPassingState:
    """
    Extend a lineage to CP(target): splits first, then rounds

    Raises:
        ContractViolation: If the target lies behind the state
    """
    if target.n_l < state.n_l or target.n_iter < state.n_iter:
        raise ContractViolation(
            f"Cannot move from CP({state.n_l},{state.n_iter}) back to {target}"
        )
    while state.n_l < target.n_l:
        state = split_by_next_label(state, mrf)
    while state.n_iter < target.n_iter:
        state = color_passing_round(state, mrf)
    return state


def cp(mrf: LabeledMRF, n_l: int, n_iter: int) -> Partition:
    """Partition after n_iter color-passing rounds at unary split threshold n_l"""
    if n_iter < 0:
        raise ContractViolation(f"N_iter must be >= 0, got {n_iter}")
    state = init_colors(mrf, n_l)
    for _ in range(n_iter):
        state = color_passing_round(state, mrf)
    return partition_from_colors(state)


def run_to_fixed_point(mrf: LabeledMRF, n_l: int, max_rounds: Optional[int] = None) -> ColorPassingState:
    """Run rounds until the variable partition stops changing"""
    max_rounds = mrf.num_vars + 1 if max_rounds is None else max_rounds
    state = init_colors(mrf, n_l)
    for _ in range(max_rounds):
        successor = color_passing_round(state, mrf)
        if partition_from_colors(successor) == partition_from_colors(state):
            return state
        state = successor
    return state


def threshold_partition(mrf: LabeledMRF, threshold: float) -> Partition:
    """
    Greedy unary-distance clustering baseline

    Variables are scanned in index order and join the first cluster whose
    representative (first member) has unary L1 distance < threshold.
    """
    if threshold < 0:
        raise ContractViolation(f"Threshold must be >= 0, got {threshold}")
    representatives = np.empty_like(mrf.unaries)
    element_of = np.empty(mrf.num_vars, dtype=np.int64)
    count = 0
    for i, table in enumerate(mrf.unaries):
        if count:
            distance = np.abs(representatives[:count] - table).sum(axis=1)
            hits = np.flatnonzero(distance < threshold)
            if hits.size:
                element_of[i] = hits[0]
                continue
        representatives[count] = table
        element_of[i] = count
        count += 1
    return Partition(element_of)


def match_threshold(
    mrf: LabeledMRF,
    target_elements: int,
    rel_tolerance: float = 0.05,
    max_steps: int = 40,
) -> tuple[float, Partition]:
    """
    Bisection for a threshold whose partition has about target_elements elements

    Returns the first threshold within rel_tolerance of the target, else the
    closest one seen.
    """
    if target_elements < 1:
        raise ContractViolation("target_elements must be >= 1")
    spread = np.abs(mrf.unaries - mrf.unaries[0]).sum(axis=1).max() if mrf.num_vars else 0.0
    low, high = 0.0, 2.0 * float(spread) + 1.0
    best: Optional[tuple[float, Partition]] = None
    best_gap = math.inf
    for _ in range(max_steps):
        middle = 0.5 * (low + high)
        partition = threshold_partition(mrf, middle)
        gap = abs(partition.num_elements - target_elements)
        if gap < best_gap:
            best, best_gap = (middle, partition), gap
        if gap <= rel_tolerance * target_elements:
            break
        if partition.num_elements > target_elements:
            low = middle
        else:
            high = middle
    logger.info(
        "Threshold %.6g gives %d elements (target %d)", best[0], best[1].num_elements, target_elements
    )
    return best
