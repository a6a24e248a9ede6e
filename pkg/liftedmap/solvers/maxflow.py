"""
Two-terminal max-flow / min-cut
Shortest augmenting paths: breadth-first levels from the source, then
blocking flow along level-increasing arcs, repeated until the sink is
unreachable. Deterministic given the arc order.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from liftedmap.core.exceptions import ContractViolation


@dataclass(frozen=True)
class FlowNetwork:
    """
    Directed network with non-negative finite capacities

    Attributes:
        num_nodes: Node count; nodes are 0..num_nodes-1
        arc_from, arc_to, capacity: Parallel arc arrays
        source, sink: Terminal node ids
    """

    num_nodes: int
    arc_from: np.ndarray
    arc_to: np.ndarray
    capacity: np.ndarray
    source: int
    sink: int

    def __post_init__(self):
        if not (0 <= self.source < self.num_nodes and 0 <= self.sink < self.num_nodes):
            raise ContractViolation("Source and sink must be valid nodes")
        if self.source == self.sink:
            raise ContractViolation("Source and sink must differ")
        if not (len(self.arc_from) == len(self.arc_to) == len(self.capacity)):
            raise ContractViolation("Arc arrays must have equal length")
        if len(self.capacity) and (np.min(self.capacity) < 0 or not np.all(np.isfinite(self.capacity))):
            raise ContractViolation("Capacities must be finite and non-negative")
        ends = np.concatenate([self.arc_from, self.arc_to])
        if ends.size and (ends.min() < 0 or ends.max() >= self.num_nodes):
            raise ContractViolation("Arc references a node outside the network")

    @classmethod
    def from_arcs(cls, num_nodes: int, arcs, source: int, sink: int) -> "FlowNetwork":
        """Build from a list of (from, to, capacity) triples"""
        arcs = list(arcs)
        return cls(
            num_nodes=num_nodes,
            arc_from=np.array([a[0] for a in arcs], dtype=np.int64),
            arc_to=np.array([a[1] for a in arcs], dtype=np.int64),
            capacity=np.array([a[2] for a in arcs], dtype=np.float64),
            source=source,
            sink=sink,
        )

    def cut_capacity(self, source_side: np.ndarray) -> float:
        """Total capacity of arcs leaving the source side"""
        crossing = source_side[self.arc_from] & ~source_side[self.arc_to]
        return float(self.capacity[crossing].sum())


def max_flow(net: FlowNetwork) -> tuple[float, np.ndarray]:
    """
    Maximum s-t flow and a minimum cut

    Returns:
        (flow value, source_side) where source_side[v] is True for nodes
        reachable from the source in the final residual network
    """
    n = net.num_nodes
    num_arcs = len(net.capacity)
    # residual arc 2k is arc k, 2k+1 its reverse
    head = [0] * (2 * num_arcs)
    residual = [0.0] * (2 * num_arcs)
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for k, (u, v, c) in enumerate(zip(net.arc_from.tolist(), net.arc_to.tolist(), net.capacity.tolist())):
        head[2 * k], head[2 * k + 1] = v, u
        residual[2 * k] = c
        adjacency[u].append(2 * k)
        adjacency[v].append(2 * k + 1)

    s, t = net.source, net.sink
    flow = 0.0
    while True:
        level = _levels(adjacency, head, residual, s, n)
        if level[t] < 0:
            break
        flow += _blocking_flow(adjacency, head, residual, level, s, t)

    level = _levels(adjacency, head, residual, s, n)
    return flow, np.array([lv >= 0 for lv in level], dtype=bool)


def _levels(adjacency, head, residual, source: int, n: int) -> list[int]:
    """Breadth-first distance from the source over arcs with residual capacity"""
    level = [-1] * n
    level[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for a in adjacency[u]:
            v = head[a]
            if residual[a] > 0 and level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
    return level


def _blocking_flow(adjacency, head, residual, level, source: int, sink: int) -> float:
    """Push flow along level-increasing paths until none is left (iterative DFS)"""
    cursor = [0] * len(adjacency)
    pushed = 0.0
    path: list[int] = []
    u = source
    while True:
        if u == sink:
            amount = min(residual[a] for a in path)
            for a in path:
                residual[a] -= amount
                residual[a ^ 1] += amount
            pushed += amount
            path.clear()
            u = source
            continue
        arcs = adjacency[u]
        advanced = False
        while cursor[u] < len(arcs):
            a = arcs[cursor[u]]
            v = head[a]
            if residual[a] > 0 and level[v] == level[u] + 1:
                path.append(a)
                u = v
                advanced = True
                break
            cursor[u] += 1
        if advanced:
            continue
        if u == source:
            return pushed
        # dead end: drop u from the level graph and retreat
        level[u] = -1
        a = path.pop()
        u = head[a ^ 1]
        cursor[u] += 1
