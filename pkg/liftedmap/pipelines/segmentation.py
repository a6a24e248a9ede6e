"""
Cooperative segmentation
Seeded multi-label segmentation whose boundary cost is a concave function of
the cut weight collected per (edge group, label). The concave term is
handled by one binary auxiliary mode per (group, label) that picks the
active linear piece; the model is linearised at the current modes and
minimised by alpha expansion, alternating with a greedy mode update.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from liftedmap.core.config import settings
from liftedmap.core.exceptions import ContractViolation
from liftedmap.inference.c2f import LevelSolver, get_init_state
from liftedmap.mrf.model import DenseTerms, LabeledMRF, grid_edges
from liftedmap.mrf.partition import Partition, build_reduced, expand
from liftedmap.pipelines.stereo import as_rgb
from liftedmap.schemas.criteria import StoppingCriteria
from liftedmap.schemas.problems import ConcaveSpec, SegmentationParams
from liftedmap.solvers.common import ImprovementCounter, LabelCursor, SolveReport, StopReason
from liftedmap.solvers.expansion import alpha_expansion_move
from liftedmap.solvers.trace import AnytimeTrace, Deadline, TraceEvent, TraceRecorder

logger = logging.getLogger(__name__)

UNSEEDED = 255


@dataclass(frozen=True)
class EdgeGroups:
    """Grid edges with the group each belongs to; groups are numbered by first edge"""

    heads: np.ndarray
    tails: np.ndarray
    group_of: np.ndarray
    num_groups: int

    def members(self, group: int) -> np.ndarray:
        return np.flatnonzero(self.group_of == group)


def cluster_edge_groups(image, num_color_bins: int, cell_size: int) -> EdgeGroups:
    """
    Group 4-connected grid edges by colour-difference bin and spatial cell

    The colour difference is the Euclidean RGB distance, binned uniformly over
    [0, 255 * sqrt(3)]; the cell is that of the edge midpoint. Only groups
    with at least one edge exist.
    """
    if num_color_bins < 1 or cell_size < 1:
        raise ContractViolation("num_color_bins and cell_size must be >= 1")
    rgb = as_rgb(image)
    height, width = rgb.shape[:2]
    heads, tails = grid_edges(width, height)
    pixels = rgb.reshape(-1, 3)
    diff = np.linalg.norm(pixels[heads] - pixels[tails], axis=1)
    bins = np.minimum((diff / (255.0 * math.sqrt(3.0)) * num_color_bins).astype(np.int64), num_color_bins - 1)

    mid_x = ((heads % width) + (tails % width)) / 2.0
    mid_y = ((heads // width) + (tails // width)) / 2.0
    cell_x = np.floor(mid_x / cell_size).astype(np.int64)
    cell_y = np.floor(mid_y / cell_size).astype(np.int64)
    cells_across = (width + cell_size - 1) // cell_size
    cells_down = (height + cell_size - 1) // cell_size
    keys = (bins * cells_down + cell_y) * cells_across + cell_x

    seen: dict[int, int] = {}
    group_of = np.array([seen.setdefault(int(k), len(seen)) for k in keys], dtype=np.int64)
    logger.debug(f"Clustered {len(keys)} edges into {len(seen)} groups")
    return EdgeGroups(heads=heads, tails=tails, group_of=group_of, num_groups=len(seen))


def concave(spec: ConcaveSpec, z):
    """F(z) = min(z, theta + epsilon * (z - theta))"""
    z = np.asarray(z, dtype=np.float64)
    return np.minimum(z, spec.theta + spec.epsilon * (z - spec.theta))


@dataclass
class AuxiliaryState:
    """Active piece of F per (group, label): 0 for the steep piece, 1 for the shallow one"""

    modes: np.ndarray

    @classmethod
    def steep(cls, num_groups: int, num_labels: int) -> "AuxiliaryState":
        return cls(np.zeros((num_groups, num_labels), dtype=np.int8))

    def slopes(self, spec: ConcaveSpec) -> np.ndarray:
        return np.where(self.modes == 0, spec.slopes[0], spec.slopes[1])

    def intercepts(self, spec: ConcaveSpec) -> np.ndarray:
        return np.where(self.modes == 0, spec.intercepts[0], spec.intercepts[1])

    def copy(self) -> "AuxiliaryState":
        return AuxiliaryState(self.modes.copy())

    def key(self) -> bytes:
        return self.modes.tobytes()

    def __eq__(self, other) -> bool:
        return isinstance(other, AuxiliaryState) and np.array_equal(self.modes, other.modes)


@dataclass(frozen=True)
class SegmentationProblem:
    """
    Image, seed map and cooperative-cut parameters

    Seed map entries are a label in 0..|L|-1 or 255 for unseeded pixels.
    """

    image: np.ndarray
    seeds: np.ndarray
    params: SegmentationParams = field(default_factory=SegmentationParams)

    def __post_init__(self):
        image = as_rgb(self.image)
        seeds = np.asarray(self.seeds, dtype=np.int64)
        if seeds.shape != image.shape[:2]:
            raise ContractViolation(f"Seed map {seeds.shape} does not match image {image.shape[:2]}")
        bad = (seeds != UNSEEDED) & ((seeds < 0) | (seeds >= self.params.num_labels))
        if np.any(bad):
            raise ContractViolation(f"Seed map holds labels outside 0..{self.params.num_labels - 1}")
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "seeds", seeds)

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def num_labels(self) -> int:
        return self.params.num_labels

    @cached_property
    def groups(self) -> EdgeGroups:
        return cluster_edge_groups(self.image, self.params.num_color_bins, self.params.cell_size)

    @cached_property
    def edge_weights(self) -> np.ndarray:
        """lambda * exp(-beta |dc|^2) with beta = 1 / (2 mean |dc|^2)"""
        pixels = self.image.reshape(-1, 3)
        squared = ((pixels[self.groups.heads] - pixels[self.groups.tails]) ** 2).sum(axis=1)
        mean = squared.mean() if squared.size else 0.0
        beta = 1.0 / (2.0 * mean) if mean > 0 else 0.0
        return self.params.edge_scale * np.exp(-beta * squared)

    @cached_property
    def unaries(self) -> np.ndarray:
        """
        Seed-colour-model unaries

        Raises:
            ContractViolation: If some label has no seed pixel
        """
        pixels = self.image.reshape(-1, 3)
        seeds = self.seeds.ravel()
        means = []
        for label in range(self.num_labels):
            chosen = seeds == label
            if not np.any(chosen):
                raise ContractViolation(f"Label {label} has no seed pixels")
            means.append(pixels[chosen].mean(axis=0))
        distance = np.linalg.norm(pixels[:, None, :] - np.array(means)[None, :, :], axis=2)
        unaries = self.params.unary_scale * distance
        seeded = np.flatnonzero(seeds != UNSEEDED)
        unaries[seeded] = settings.SEED_PENALTY
        unaries[seeded, seeds[seeded]] = 0.0
        return unaries


def cut_weights(problem: SegmentationProblem, x) -> np.ndarray:
    """
    (groups, |L|) collected cut weight

    Every cut edge adds its weight to the label of each of its two ends.
    """
    x = np.asarray(x, dtype=np.int64)
    groups = problem.groups
    z = np.zeros((groups.num_groups, problem.num_labels))
    head_labels, tail_labels = x[groups.heads], x[groups.tails]
    cut = head_labels != tail_labels
    w = problem.edge_weights[cut]
    np.add.at(z, (groups.group_of[cut], head_labels[cut]), w)
    np.add.at(z, (groups.group_of[cut], tail_labels[cut]), w)
    return z


def _check_labels(problem: SegmentationProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (problem.height * problem.width,):
        raise ContractViolation(f"Assignment has shape {x.shape}, expected ({problem.height * problem.width},)")
    if x.size and (x.min() < 0 or x.max() >= problem.num_labels):
        raise ContractViolation(f"Assignment labels must lie in 0..{problem.num_labels - 1}")
    return x


def cogc_energy(problem: SegmentationProblem, x) -> float:
    """Unary sum plus F of the cut weight of every (group, label)"""
    x = _check_labels(problem, x)
    unary = problem.unaries[np.arange(len(x)), x]
    boundary = concave(problem.params.concave, cut_weights(problem, x))
    return math.fsum(unary.tolist()) + math.fsum(boundary.ravel().tolist())


def best_aux(problem: SegmentationProblem, x) -> AuxiliaryState:
    """Modes minimising each linear piece at x (the steep piece on ties)"""
    z = cut_weights(problem, _check_labels(problem, x))
    spec = problem.params.concave
    shallow = spec.slopes[1] * z + spec.intercepts[1] < spec.slopes[0] * z + spec.intercepts[0]
    return AuxiliaryState(shallow.astype(np.int8))


def build_segmentation_mrf(problem: SegmentationProblem, aux: AuxiliaryState) -> LabeledMRF:
    """
    Pairwise model linearised at aux

    An edge of weight w in group g costs w * (s[g, a] + s[g, b]) for labels
    a != b and nothing for a == b, s being the active slopes. The intercepts
    are constant in x and left out (see linearized_energy).
    """
    groups = problem.groups
    if aux.modes.shape != (groups.num_groups, problem.num_labels):
        raise ContractViolation(
            f"Auxiliary state has shape {aux.modes.shape}, expected {(groups.num_groups, problem.num_labels)}"
        )
    slopes = aux.slopes(problem.params.concave)[groups.group_of]
    tables = problem.edge_weights[:, None, None] * (slopes[:, :, None] + slopes[:, None, :])
    tables[:, np.arange(problem.num_labels), np.arange(problem.num_labels)] = 0.0
    return LabeledMRF(
        problem.unaries,
        groups.heads,
        groups.tails,
        DenseTerms(tables),
        grid_dims=(problem.width, problem.height),
    )


def linearized_energy(problem: SegmentationProblem, aux: AuxiliaryState, x) -> float:
    """Energy of x in the linearised model, intercepts included; never below cogc_energy"""
    x = _check_labels(problem, x)
    spec = problem.params.concave
    z = cut_weights(problem, x)
    pieces = aux.slopes(spec) * z + aux.intercepts(spec)
    unary = problem.unaries[np.arange(len(x)), x]
    return math.fsum(unary.tolist()) + math.fsum(pieces.ravel().tolist())


class CooperativeLevelSolver(LevelSolver):
    """
    Greedy auxiliary descent on one (possibly reduced) level

    Keeps the last auxiliary state that produced an accepted change across
    levels, so a refinement resumes from it.
    """

    def __init__(self, problem: SegmentationProblem, aux: Optional[AuxiliaryState] = None):
        self.problem = problem
        num_vars = problem.height * problem.width
        if aux is None:
            start = np.argmin(problem.unaries, axis=1)
            aux = best_aux(problem, start) if num_vars else AuxiliaryState.steep(0, problem.num_labels)
        self.accepted_aux = aux.copy()
        self._initial_model = build_segmentation_mrf(problem, aux)
        self._cache: dict[tuple[Optional[Partition], bytes], LabeledMRF] = {}

    @property
    def coloring_model(self) -> LabeledMRF:
        return self._initial_model

    def level_model(self, partition: Optional[Partition], aux: AuxiliaryState) -> LabeledMRF:
        key = (partition, aux.key())
        if key not in self._cache:
            if len(self._cache) > 8:
                self._cache.clear()
            flat = build_segmentation_mrf(self.problem, aux)
            if partition is None or partition.is_degenerate:
                self._cache[key] = flat
            else:
                self._cache[key] = build_reduced(flat, partition).model
        return self._cache[key]

    def _flat(self, partition: Optional[Partition], y) -> np.ndarray:
        return np.asarray(y, dtype=np.int64) if partition is None else expand(partition, y)

    def level_energy(self, partition, y):
        return cogc_energy(self.problem, self._flat(partition, y))

    def initial_assignment(self, partition):
        return get_init_state(self.level_model(partition, self.accepted_aux))

    def solve(self, partition, start, criteria, recorder, level, deadline, cursor=None):
        problem = self.problem
        first_row = len(recorder.trace)
        budget = Deadline(recorder, criteria.wall_clock_budget)
        y = np.asarray(start, dtype=np.int64).copy()
        value = self.level_energy(partition, y)
        counter = ImprovementCounter(criteria, value)
        # resume from the last auxiliary state that produced a change
        aux = self.accepted_aux.copy()
        window_aux = aux.copy()
        num_labels = problem.num_labels
        cursor = cursor or LabelCursor()
        alpha = cursor.next_label % num_labels
        quiet = cursor.quiet_moves
        moves = 0
        reason = StopReason.CONVERGED

        while quiet < num_labels:
            if budget.expired() or deadline.expired():
                reason = StopReason.BUDGET
                break
            model = self.level_model(partition, aux)
            candidate = alpha_expansion_move(model, y, alpha)
            moves += 1
            quiet += 1
            if not np.array_equal(candidate, y):
                new_value = self.level_energy(partition, candidate)
                if new_value < value - criteria.energy_tolerance:
                    y, value = candidate, new_value
                    self.accepted_aux = aux.copy()
                    window_aux, quiet = aux.copy(), 0
                elif new_value > value + criteria.energy_tolerance:
                    logger.debug(f"Rejected alpha={alpha} step raising energy to {new_value:.6f}")
                    aux = self.accepted_aux.copy()
            recorder.record(value, TraceEvent.MOVE, level)
            alpha = (alpha + 1) % num_labels
            closes_cycle = alpha == 0
            if closes_cycle:
                aux = best_aux(problem, self._flat(partition, y))
                if aux != window_aux:
                    window_aux, quiet = aux.copy(), 0
            if (criteria.count_unit == "move" or closes_cycle) and counter.attempt(value):
                reason = StopReason.CRITERIA
                break

        logger.info(
            "Auxiliary descent stopped",
            extra={"energy": value, "rounds": moves, "stop_reason": reason.value, "level_index": level},
        )
        return SolveReport(
            assignment=y,
            energy=value,
            trace=AnytimeTrace(recorder.trace.rows[first_row:]),
            rounds=moves,
            stop_reason=reason,
            cursor=LabelCursor(alpha, quiet),
        )


def greedy_aux_descent(
    problem: SegmentationProblem,
    start,
    criteria: StoppingCriteria,
    trace_sink: Optional[TraceRecorder] = None,
    aux: Optional[AuxiliaryState] = None,
) -> SolveReport:
    """
    Flat cooperative-cut minimisation from start

    Alternates greedy auxiliary updates with alpha-expansion moves on the
    linearised model; cogc_energy never increases along the returned trace.
    """
    recorder = trace_sink or TraceRecorder()
    first_row = len(recorder.trace)
    x = _check_labels(problem, start)
    solver = CooperativeLevelSolver(problem, aux if aux is not None else best_aux(problem, x))
    value = cogc_energy(problem, x)
    recorder.record(value, TraceEvent.START, 0)
    report = solver.solve(None, x, criteria, recorder, 0, Deadline(recorder, None))
    recorder.record(report.energy, TraceEvent.STOP, 0)
    report.trace = AnytimeTrace(recorder.trace.rows[first_row:])
    return report


def label_map(problem: SegmentationProblem, x) -> np.ndarray:
    """Assignment reshaped to the (H, W) label image"""
    return np.asarray(x, dtype=np.int64).reshape(problem.height, problem.width)
