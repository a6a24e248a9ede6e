"""
Partitions and reduced models
Lifted pixels, reduced (lifted) MRFs, and the assignment maps between
coarse and fine levels that keep energies equal.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from liftedmap.core.exceptions import ContractViolation
from liftedmap.mrf.model import DenseTerms, LabeledMRF, TruncatedLinearTerms, energy

logger = logging.getLogger(__name__)


def canonical_ids(element_of) -> np.ndarray:
    """Relabel element ids densely in order of each element's first variable"""
    element_of = np.asarray(element_of, dtype=np.int64).ravel()
    if element_of.size == 0:
        return element_of
    _, first, inverse = np.unique(element_of, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    return remap[inverse.ravel()]


class Partition:
    """
    Disjoint cover of variables 0..n-1 by lifted pixels

    Element ids are canonical, so two partitions are equal iff their
    element_of vectors are equal.
    """

    def __init__(self, element_of):
        ids = canonical_ids(element_of)
        ids.setflags(write=False)
        self.element_of = ids
        self.num_elements = int(ids.max()) + 1 if ids.size else 0

    @classmethod
    def degenerate(cls, num_vars: int) -> "Partition":
        """Every variable on its own (the finest partition)"""
        return cls(np.arange(num_vars))

    @classmethod
    def single(cls, num_vars: int) -> "Partition":
        """All variables in one element (the coarsest partition)"""
        return cls(np.zeros(num_vars, dtype=np.int64))

    @classmethod
    def from_members(cls, members: Sequence[Sequence[int]], num_vars: int) -> "Partition":
        element_of = np.full(num_vars, -1, dtype=np.int64)
        for k, group in enumerate(members):
            group = np.asarray(group, dtype=np.int64)
            if np.any(element_of[group] != -1):
                raise ContractViolation("Partition elements overlap")
            element_of[group] = k
        if np.any(element_of == -1):
            raise ContractViolation("Partition elements do not cover every variable")
        return cls(element_of)

    @property
    def num_vars(self) -> int:
        return len(self.element_of)

    @cached_property
    def members(self) -> list[np.ndarray]:
        order = np.argsort(self.element_of, kind="stable")
        bounds = np.cumsum(np.bincount(self.element_of, minlength=self.num_elements))[:-1]
        return np.split(order, bounds)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.element_of, minlength=self.num_elements)

    @property
    def is_degenerate(self) -> bool:
        return self.num_elements == self.num_vars

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.element_of, other.element_of)

    def __hash__(self) -> int:
        return hash(self.element_of.tobytes())

    def __repr__(self) -> str:
        return f"<Partition(num_vars={self.num_vars}, num_elements={self.num_elements})>"


@dataclass(frozen=True)
class ReducedMRF:
    """
    Lifted model over partition variables

    lifted_unaries[k, l] sums the unaries of element k plus the diagonal
    psi(l, l) of every edge inside k. lifted_tables[e] is the summed table of
    all base edges running from element lifted_heads[e] to lifted_tails[e]
    (lifted_heads[e] < lifted_tails[e]).
    """

    base: LabeledMRF
    partition: Partition
    lifted_unaries: np.ndarray
    lifted_heads: np.ndarray
    lifted_tails: np.ndarray
    lifted_tables: np.ndarray

    @cached_property
    def model(self) -> LabeledMRF:
        """The reduced model as a plain LabeledMRF, for solvers"""
        return LabeledMRF(
            self.lifted_unaries,
            self.lifted_heads,
            self.lifted_tails,
            DenseTerms(self.lifted_tables),
        )

    @property
    def num_elements(self) -> int:
        return self.partition.num_elements


def build_reduced(mrf: LabeledMRF, p: Partition) -> ReducedMRF:
    """
    Build the reduced model of mrf under partition p

    Raises:
        ContractViolation: If p does not cover exactly mrf's variables
    """
    if p.num_vars != mrf.num_vars:
        raise ContractViolation(
            f"Partition covers {p.num_vars} variables, model has {mrf.num_vars}"
        )
    r = p.num_elements
    num_labels = mrf.num_labels
    part = p.element_of
    grid = np.arange(num_labels)

    lifted_unaries = np.zeros((r, num_labels))
    np.add.at(lifted_unaries, part, mrf.unaries)

    head_el = part[mrf.heads]
    tail_el = part[mrf.tails]
    inside = head_el == tail_el
    intra = np.flatnonzero(inside)
    if intra.size:
        diagonal = mrf.pairwise.cost(intra[:, None], grid[None, :], grid[None, :])
        np.add.at(lifted_unaries, head_el[intra], diagonal)

    cross = np.flatnonzero(~inside)
    lo = np.minimum(head_el[cross], tail_el[cross])
    hi = np.maximum(head_el[cross], tail_el[cross])
    keys, slot = np.unique(lo * r + hi, return_inverse=True)
    slot = slot.ravel()
    lifted_tables = np.zeros((len(keys), num_labels, num_labels))

    if isinstance(mrf.pairwise, TruncatedLinearTerms):
        # Sum of w * D_t over edges equals (sum of w) * D_t for a shared truncation
        dist = np.abs(grid[:, None] - grid[None, :])
        truncations = mrf.pairwise.truncations[cross]
        weights = mrf.pairwise.weights[cross]
        for t in np.unique(truncations):
            chosen = truncations == t
            weight_sum = np.bincount(slot[chosen], weights=weights[chosen], minlength=len(keys))
            lifted_tables += weight_sum[:, None, None] * np.minimum(dist, t)[None, :, :]
    elif cross.size:
        tables = mrf.pairwise.tables(cross, num_labels)
        flipped = head_el[cross] > tail_el[cross]
        tables[flipped] = np.transpose(tables[flipped], (0, 2, 1))
        np.add.at(lifted_tables, slot, tables)

    logger.debug(
        "Built reduced model",
        extra={"num_elements": r},
    )
    return ReducedMRF(
        base=mrf,
        partition=p,
        lifted_unaries=lifted_unaries,
        lifted_heads=(keys // r).astype(np.int64) if r else keys,
        lifted_tails=(keys % r).astype(np.int64) if r else keys,
        lifted_tables=lifted_tables,
    )


def reduced_energy(rm: ReducedMRF, y) -> float:
    """Energy of a partition assignment in the reduced model"""
    y = np.asarray(y)
    if y.shape != (rm.num_elements,):
        raise ContractViolation(f"Partition assignment has shape {y.shape}, expected ({rm.num_elements},)")
    return energy(rm.model, y)


def expand(p: Partition, y) -> np.ndarray:
    """Flat assignment giving every variable its element's label"""
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (p.num_elements,):
        raise ContractViolation(f"Partition assignment has shape {y.shape}, expected ({p.num_elements},)")
    return y[p.element_of]


def _same_support(p: Partition, q: Partition) -> None:
    if p.num_vars != q.num_vars:
        raise ContractViolation(f"Partitions cover {p.num_vars} and {q.num_vars} variables")


def is_coarser(p: Partition, q: Partition) -> bool:
    """True iff every element of q lies inside some element of p (p is coarser than q)"""
    _same_support(p, q)
    if p.num_vars == 0:
        return True
    pairs = np.unique(q.element_of * max(p.num_elements, 1) + p.element_of)
    return len(pairs) == q.num_elements


def restrict_partition(coarse: Partition, fine: Partition) -> np.ndarray:
    """
    Fine partition seen as a partition of the coarse elements

    Returns:
        parent, where parent[f] is the coarse element containing fine element f

    Raises:
        ContractViolation: If coarse is not coarser than fine
    """
    if not is_coarser(coarse, fine):
        raise ContractViolation("restrict_partition requires coarse to be coarser than fine")
    parent = np.empty(fine.num_elements, dtype=np.int64)
    parent[fine.element_of] = coarse.element_of
    return parent


def lift_assignment(coarse: Partition, fine: Partition, y_coarse) -> np.ndarray:
    """Hand a coarse assignment to the finer partition with the same expansion"""
    y_coarse = np.asarray(y_coarse, dtype=np.int64)
    if y_coarse.shape != (coarse.num_elements,):
        raise ContractViolation(
            f"Coarse assignment has shape {y_coarse.shape}, expected ({coarse.num_elements},)"
        )
    return y_coarse[restrict_partition(coarse, fine)]
