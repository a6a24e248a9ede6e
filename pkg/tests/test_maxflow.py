"""
Tests for the max-flow / min-cut core
"""
import itertools

import numpy as np
import pytest

from liftedmap.core.exceptions import ContractViolation
from liftedmap.solvers.maxflow import FlowNetwork, max_flow


def exhaustive_min_cut(net: FlowNetwork) -> float:
    """Smallest cut capacity over every source-side set"""
    others = [v for v in range(net.num_nodes) if v not in (net.source, net.sink)]
    best = np.inf
    for bits in itertools.product([False, True], repeat=len(others)):
        side = np.zeros(net.num_nodes, dtype=bool)
        side[net.source] = True
        side[others] = bits
        best = min(best, net.cut_capacity(side))
    return best


def random_network(rng: np.random.Generator) -> FlowNetwork:
    n = int(rng.integers(2, 9))
    arcs = [
        (u, v, int(rng.integers(0, 10)))
        for u in range(n)
        for v in range(n)
        if u != v and rng.random() < 0.4
    ]
    return FlowNetwork.from_arcs(n, arcs, source=0, sink=n - 1)


class TestFlowNetwork:
    """Test network validation"""

    def test_rejects_negative_capacity(self):
        with pytest.raises(ContractViolation):
            FlowNetwork.from_arcs(2, [(0, 1, -1.0)], 0, 1)

    def test_rejects_same_terminals(self):
        with pytest.raises(ContractViolation):
            FlowNetwork.from_arcs(2, [(0, 1, 1.0)], 0, 0)

    def test_rejects_unknown_node(self):
        with pytest.raises(ContractViolation):
            FlowNetwork.from_arcs(2, [(0, 2, 1.0)], 0, 1)


class TestMaxFlow:
    """Test flow values and minimum cuts"""

    def test_single_arc(self):
        flow, side = max_flow(FlowNetwork.from_arcs(2, [(0, 1, 3.0)], 0, 1))
        assert flow == 3.0
        assert side.tolist() == [True, False]

    def test_no_path(self):
        flow, side = max_flow(FlowNetwork.from_arcs(3, [(0, 1, 5.0)], 0, 2))
        assert flow == 0.0
        assert side.tolist() == [True, True, False]

    def test_bottleneck(self):
        """Test a diamond whose outgoing arcs limit the flow"""
        arcs = [(0, 1, 4.0), (0, 2, 4.0), (1, 3, 1.0), (2, 3, 2.0), (1, 2, 3.0)]
        flow, side = max_flow(FlowNetwork.from_arcs(4, arcs, 0, 3))
        assert flow == 3.0
        assert side.tolist() == [True, True, True, False]

    def test_matches_exhaustive_min_cut(self):
        """Test flow value equals the smallest cut on random small networks"""
        rng = np.random.default_rng(0)
        for _ in range(200):
            net = random_network(rng)
            flow, side = max_flow(net)
            expected = exhaustive_min_cut(net)
            assert flow == expected
            assert side[net.source] and not side[net.sink]
            assert net.cut_capacity(side) == expected

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        net = random_network(rng)
        first, second = max_flow(net), max_flow(net)
        assert first[0] == second[0]
        np.testing.assert_array_equal(first[1], second[1])
