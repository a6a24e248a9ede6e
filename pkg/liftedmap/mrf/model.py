"""
Pairwise MRF model
Label sets, pairwise potential forms, the immutable LabeledMRF, energy
evaluation and the exhaustive MAP oracle.

All values are energies (negative log potentials); lower is better.
"""
from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Optional, Sequence

import numpy as np

from liftedmap.core.config import settings
from liftedmap.core.exceptions import ContractViolation, EnumerationCapExceeded

logger = logging.getLogger(__name__)

# Assignments are plain integer label vectors
Assignment = np.ndarray


@dataclass(frozen=True)
class LabelSet:
    """Dense zero-based labels 0..size-1"""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ContractViolation(f"Label set size must be >= 1, got {self.size}")

    @property
    def labels(self) -> range:
        return range(self.size)


@dataclass(frozen=True, eq=False)
class PairwiseSpec:
    """
    One edge's pairwise potential

    Either a dense |L|x|L| table or the parametric truncated-linear form
    weight * min(|a - b|, truncation). Potts is truncation == 1.
    Dense specs compare by table contents.
    """

    weight: float = 1.0
    truncation: float = 1.0
    table: Optional[np.ndarray] = None

    def _key(self) -> tuple:
        if self.table is None:
            return ("tl", self.weight, self.truncation)
        return ("dense", self.table.shape, self.table.tobytes())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PairwiseSpec):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    @classmethod
    def truncated_linear(cls, weight: float, truncation: float) -> "PairwiseSpec":
        return cls(weight=float(weight), truncation=float(truncation))

    @classmethod
    def potts(cls, weight: float) -> "PairwiseSpec":
        return cls(weight=float(weight), truncation=1.0)

    @classmethod
    def dense(cls, table) -> "PairwiseSpec":
        table = np.array(table, dtype=np.float64)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ContractViolation(f"Dense pairwise table must be square, got {table.shape}")
        table.setflags(write=False)
        return cls(weight=1.0, truncation=0.0, table=table)

    @property
    def is_dense(self) -> bool:
        return self.table is not None

    def as_table(self, num_labels: int) -> np.ndarray:
        if self.is_dense:
            return np.array(self.table)
        grid = np.arange(num_labels)
        return self.weight * np.minimum(np.abs(grid[:, None] - grid[None, :]), self.truncation)


def pairwise_eval(spec: PairwiseSpec, a: int, b: int) -> float:
    """
    Evaluate a pairwise potential at labels (a, b)

    Args:
        spec: Dense or truncated-linear pairwise form
        a: Label of the first endpoint
        b: Label of the second endpoint

    Returns:
        Table entry, or w * min(|a - b|, t) for the parametric form
    """
    if a < 0 or b < 0:
        raise ContractViolation(f"Labels must be non-negative, got ({a}, {b})")
    if spec.is_dense:
        size = spec.table.shape[0]
        if a >= size or b >= size:
            raise ContractViolation(f"Labels ({a}, {b}) outside table of size {size}")
        return float(spec.table[a, b])
    return float(spec.weight * min(abs(a - b), spec.truncation))


class PairwiseTerms(ABC):
    """Vectorised storage for the pairwise potentials of all edges of a model"""

    num_edges: int

    @abstractmethod
    def cost(self, edges: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """psi_e(a_e, b_e) for each listed edge"""

    @abstractmethod
    def rows(self, edges: np.ndarray, other: np.ndarray, as_head: np.ndarray, num_labels: int) -> np.ndarray:
        """
        Cost of every label at one endpoint with the other endpoint fixed

        Returns a (len(edges), num_labels) array; row k holds psi(l, other_k)
        when as_head[k] else psi(other_k, l).
        """

    @abstractmethod
    def tables(self, edges: np.ndarray, num_labels: int) -> np.ndarray:
        """Dense (len(edges), L, L) tables"""

    @abstractmethod
    def spec(self, edge: int) -> PairwiseSpec:
        """Single-edge view of the potential"""

    @abstractmethod
    def color_keys(self) -> list[Hashable]:
        """Per-edge key; equal keys mean exactly equal potentials"""

    @abstractmethod
    def symmetric(self) -> np.ndarray:
        """Per-edge flag: table equals its transpose"""

    @abstractmethod
    def scaled(self, factor: float) -> "PairwiseTerms":
        """Copy with every potential multiplied by factor"""


class TruncatedLinearTerms(PairwiseTerms):
    """w_e * min(|a - b|, t_e) on every edge"""

    def __init__(self, weights: np.ndarray, truncations: np.ndarray):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.truncations = np.asarray(truncations, dtype=np.float64)
        if self.weights.shape != self.truncations.shape or self.weights.ndim != 1:
            raise ContractViolation("weights and truncations must be equal-length vectors")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.truncations))):
            raise ContractViolation("Pairwise parameters must be finite")
        self.weights.setflags(write=False)
        self.truncations.setflags(write=False)
        self.num_edges = len(self.weights)

    def cost(self, edges, a, b):
        return self.weights[edges] * np.minimum(np.abs(a - b), self.truncations[edges])

    def rows(self, edges, other, as_head, num_labels):
        grid = np.arange(num_labels)[None, :]
        dist = np.abs(grid - np.asarray(other)[:, None])
        return self.weights[edges][:, None] * np.minimum(dist, self.truncations[edges][:, None])

    def tables(self, edges, num_labels):
        grid = np.arange(num_labels)
        dist = np.abs(grid[:, None] - grid[None, :])
        return self.weights[edges][:, None, None] * np.minimum(
            dist[None, :, :], self.truncations[edges][:, None, None]
        )

    def spec(self, edge):
        return PairwiseSpec.truncated_linear(self.weights[edge], self.truncations[edge])

    def color_keys(self):
        return [("tl", float(w), float(t)) for w, t in zip(self.weights, self.truncations)]

    def symmetric(self):
        return np.ones(self.num_edges, dtype=bool)

    def scaled(self, factor):
        return TruncatedLinearTerms(self.weights * factor, self.truncations)


class DenseTerms(PairwiseTerms):
    """One explicit |L|x|L| table per edge"""

    def __init__(self, tables: np.ndarray):
        self.table_stack = np.asarray(tables, dtype=np.float64)
        if self.table_stack.ndim != 3 or self.table_stack.shape[1] != self.table_stack.shape[2]:
            raise ContractViolation(f"Dense tables must have shape (m, L, L), got {self.table_stack.shape}")
        if not np.all(np.isfinite(self.table_stack)):
            raise ContractViolation("Pairwise tables must be finite")
        self.table_stack.setflags(write=False)
        self.num_edges = self.table_stack.shape[0]

    def cost(self, edges, a, b):
        return self.table_stack[edges, a, b]

    def rows(self, edges, other, as_head, num_labels):
        picked = self.table_stack[edges]
        k = np.arange(len(edges))
        # head rows: psi(l, other) is column `other`; tail rows: psi(other, l) is row `other`
        return np.where(
            np.asarray(as_head)[:, None],
            picked[k, :, other],
            picked[k, other, :],
        )

    def tables(self, edges, num_labels):
        return np.array(self.table_stack[edges])

    def spec(self, edge):
        return PairwiseSpec.dense(self.table_stack[edge])

    def color_keys(self):
        return [("dense", table.tobytes()) for table in self.table_stack]

    def symmetric(self):
        return np.all(self.table_stack == np.transpose(self.table_stack, (0, 2, 1)), axis=(1, 2))

    def scaled(self, factor):
        return DenseTerms(self.table_stack * factor)


def grid_edges(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """
    4-connected grid edges over row-major pixel indices

    Horizontal edges come first (row-major), then vertical edges.
    """
    index = np.arange(width * height).reshape(height, width)
    heads = np.concatenate([index[:, :-1].ravel(), index[:-1, :].ravel()])
    tails = np.concatenate([index[:, 1:].ravel(), index[1:, :].ravel()])
    return heads, tails


class LabeledMRF:
    """
    Immutable pairwise MRF

    Attributes:
        unaries: (num_vars, |L|) unary energies
        heads, tails: edge endpoint arrays, heads[e] != tails[e]
        pairwise: vectorised pairwise potentials, one per edge
        grid_dims: optional (width, height) for grid-structured models
    """

    def __init__(
        self,
        unaries,
        heads,
        tails,
        pairwise: PairwiseTerms,
        grid_dims: Optional[tuple[int, int]] = None,
    ):
        unaries = np.array(unaries, dtype=np.float64)
        if unaries.ndim != 2 or unaries.shape[1] < 1:
            raise ContractViolation(f"Unary table must be (num_vars, |L|), got shape {unaries.shape}")
        if not np.all(np.isfinite(unaries)):
            raise ContractViolation("Unary energies must be finite")
        heads = np.array(heads, dtype=np.int64).ravel()
        tails = np.array(tails, dtype=np.int64).ravel()
        num_vars = unaries.shape[0]

        if heads.shape != tails.shape or len(heads) != pairwise.num_edges:
            raise ContractViolation("Edge endpoint arrays and pairwise terms disagree in length")
        if len(heads) and (heads.min() < 0 or tails.min() < 0 or heads.max() >= num_vars or tails.max() >= num_vars):
            raise ContractViolation("Edge references a variable outside 0..num_vars-1")
        if np.any(heads == tails):
            raise ContractViolation("Self-loop edges are not allowed")
        keys = np.minimum(heads, tails) * num_vars + np.maximum(heads, tails)
        if len(np.unique(keys)) != len(keys):
            raise ContractViolation("Duplicate undirected edge")
        if isinstance(pairwise, DenseTerms) and pairwise.table_stack.shape[1] != unaries.shape[1]:
            raise ContractViolation("Dense pairwise tables do not match the label count")
        if grid_dims is not None and grid_dims[0] * grid_dims[1] != num_vars:
            raise ContractViolation(f"grid_dims {grid_dims} do not cover {num_vars} variables")

        for array in (unaries, heads, tails):
            array.setflags(write=False)
        self.unaries = unaries
        self.heads = heads
        self.tails = tails
        self.pairwise = pairwise
        self.grid_dims = grid_dims
        self.labels = LabelSet(unaries.shape[1])

    @classmethod
    def from_edges(
        cls,
        unaries,
        edges: Sequence[tuple[int, int, PairwiseSpec]],
        grid_dims: Optional[tuple[int, int]] = None,
    ) -> "LabeledMRF":
        """
        Build from an edge list of (i, j, PairwiseSpec)

        All-parametric edge lists keep the parametric storage; any dense edge
        densifies the whole model.
        """
        unaries = np.asarray(unaries, dtype=np.float64)
        num_labels = unaries.shape[1]
        heads = [e[0] for e in edges]
        tails = [e[1] for e in edges]
        specs = [e[2] for e in edges]
        if any(spec.is_dense for spec in specs):
            tables = np.stack([spec.as_table(num_labels) for spec in specs]) if specs else np.zeros((0, num_labels, num_labels))
            terms: PairwiseTerms = DenseTerms(tables)
        else:
            terms = TruncatedLinearTerms(
                np.array([s.weight for s in specs], dtype=np.float64),
                np.array([s.truncation for s in specs], dtype=np.float64),
            )
        return cls(unaries, heads, tails, terms, grid_dims=grid_dims)

    @property
    def num_vars(self) -> int:
        return self.unaries.shape[0]

    @property
    def num_labels(self) -> int:
        return self.labels.size

    @property
    def num_edges(self) -> int:
        return len(self.heads)

    def edge_spec(self, edge: int) -> PairwiseSpec:
        return self.pairwise.spec(edge)

    def scaled(self, factor: float) -> "LabeledMRF":
        """Copy with every potential multiplied by factor"""
        return LabeledMRF(
            self.unaries * factor, self.heads, self.tails, self.pairwise.scaled(factor), self.grid_dims
        )

    @cached_property
    def incidence(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        CSR incidence: (offsets, edge ids, is_head)

        Edges incident to variable i are edge_ids[offsets[i]:offsets[i+1]].
        """
        endpoints = np.concatenate([self.heads, self.tails])
        edge_ids = np.concatenate([np.arange(self.num_edges), np.arange(self.num_edges)])
        is_head = np.concatenate([np.ones(self.num_edges, bool), np.zeros(self.num_edges, bool)])
        order = np.argsort(endpoints, kind="stable")
        counts = np.bincount(endpoints, minlength=self.num_vars)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return offsets, edge_ids[order], is_head[order]

    def check_assignment(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.num_vars,):
            raise ContractViolation(f"Assignment has shape {x.shape}, expected ({self.num_vars},)")
        if x.size and (x.min() < 0 or x.max() >= self.num_labels):
            raise ContractViolation(f"Assignment labels must lie in 0..{self.num_labels - 1}")
        return x.astype(np.int64, copy=False)

    def unary_terms(self, x: np.ndarray) -> np.ndarray:
        return self.unaries[np.arange(self.num_vars), x]

    def edge_terms(self, x: np.ndarray) -> np.ndarray:
        return self.pairwise.cost(np.arange(self.num_edges), x[self.heads], x[self.tails])

    def __repr__(self) -> str:
        return f"<LabeledMRF(num_vars={self.num_vars}, labels={self.num_labels}, edges={self.num_edges})>"


def energy(mrf: LabeledMRF, x) -> float:
    """
    Energy of a complete assignment

    Sum of unary terms (variable order) then pairwise terms (edge order),
    accumulated with math.fsum so the result is the correctly rounded sum.

    Raises:
        ContractViolation: If x does not match the model
    """
    x = mrf.check_assignment(x)
    return math.fsum(np.concatenate([mrf.unary_terms(x), mrf.edge_terms(x)]).tolist())


def _digits(codes: np.ndarray, num_vars: int, num_labels: int) -> np.ndarray:
    """Assignments whose base-|L| code is `codes`; variable 0 is most significant"""
    powers = num_labels ** np.arange(num_vars - 1, -1, -1, dtype=np.int64)
    return (codes[:, None] // powers[None, :]) % num_labels


def brute_force_map(mrf: LabeledMRF, cap: Optional[int] = None, chunk: int = 1 << 16) -> tuple[np.ndarray, float]:
    """
    Exhaustive MAP oracle

    Enumerates assignments in lexicographic order; the first minimiser wins,
    so ties resolve to the lexicographically smallest assignment.

    Args:
        mrf: Model to minimise
        cap: Maximum number of assignments to enumerate (default BRUTE_FORCE_CAP)
        chunk: Assignments scored per vectorised batch

    Returns:
        (minimiser, energy)

    Raises:
        EnumerationCapExceeded: If |L|^num_vars exceeds the cap
    """
    cap = settings.BRUTE_FORCE_CAP if cap is None else cap
    total = mrf.num_labels ** mrf.num_vars
    if total > cap:
        raise EnumerationCapExceeded(total, cap)

    best_code = 0
    best_value = math.inf
    edge_ids = np.arange(mrf.num_edges)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        xs = _digits(codes, mrf.num_vars, mrf.num_labels)
        values = mrf.unaries[np.arange(mrf.num_vars)[None, :], xs].sum(axis=1)
        if mrf.num_edges:
            values = values + mrf.pairwise.cost(
                edge_ids[None, :], xs[:, mrf.heads], xs[:, mrf.tails]
            ).sum(axis=1)
        k = int(np.argmin(values))
        if values[k] < best_value:
            best_value = float(values[k])
            best_code = int(codes[k])

    best = _digits(np.array([best_code]), mrf.num_vars, mrf.num_labels)[0]
    logger.debug("Brute force enumerated %d assignments", total)
    return best, energy(mrf, best)
