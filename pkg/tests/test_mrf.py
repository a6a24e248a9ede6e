"""
Tests for pairwise MRF models, energy evaluation and the exhaustive oracle
"""
import itertools
import math

import numpy as np
import pytest

from liftedmap.core.exceptions import ContractViolation, EnumerationCapExceeded
from liftedmap.mrf.model import (
    DenseTerms,
    LabeledMRF,
    LabelSet,
    PairwiseSpec,
    PairwiseTerms,
    TruncatedLinearTerms,
    brute_force_map,
    energy,
    grid_edges,
    pairwise_eval,
)


class TestPairwiseEval:
    """Test the dense and truncated-linear pairwise forms"""

    def test_truncated_linear_caps_distance(self):
        """Test w * min(|a - b|, t) beyond the truncation"""
        assert pairwise_eval(PairwiseSpec.truncated_linear(2.0, 3.0), 0, 5) == 6.0

    def test_truncated_linear_zero_on_equal_labels(self):
        assert pairwise_eval(PairwiseSpec.truncated_linear(2.0, 3.0), 4, 4) == 0.0

    def test_dense_reads_table(self):
        """Test every entry of a random dense table reads back"""
        table = np.random.default_rng(0).uniform(size=(4, 4))
        spec = PairwiseSpec.dense(table)
        for a, b in itertools.product(range(4), repeat=2):
            assert pairwise_eval(spec, a, b) == table[a, b]

    def test_dense_rejects_out_of_range_label(self):
        with pytest.raises(ContractViolation):
            pairwise_eval(PairwiseSpec.dense(np.zeros((2, 2))), 0, 2)

    def test_dense_must_be_square(self):
        with pytest.raises(ContractViolation):
            PairwiseSpec.dense(np.zeros((2, 3)))

    def test_potts_is_truncation_one(self):
        spec = PairwiseSpec.potts(1.5)
        assert pairwise_eval(spec, 0, 3) == 1.5
        assert pairwise_eval(spec, 2, 2) == 0.0

    def test_dense_specs_compare_by_table(self):
        """Test dense specs differing only in their tables are unequal"""
        first = PairwiseSpec.dense([[0.0, 1.0], [1.0, 0.0]])
        second = PairwiseSpec.dense([[0.0, 2.0], [2.0, 0.0]])
        assert first != second
        assert first == PairwiseSpec.dense([[0.0, 1.0], [1.0, 0.0]])
        assert hash(first) == hash(PairwiseSpec.dense([[0.0, 1.0], [1.0, 0.0]]))
        assert first != PairwiseSpec.potts(1.0)
        assert len({first, second, PairwiseSpec.potts(1.0), PairwiseSpec.potts(1.0)}) == 3


class TestPairwiseTerms:
    """Test vectorised pairwise storage"""

    def test_rows_match_tables(self):
        """Test rows() against tables() for both endpoint roles"""
        rng = np.random.default_rng(1)
        dense = DenseTerms(rng.uniform(size=(3, 4, 4)))
        linear = TruncatedLinearTerms(np.array([1.0, 2.0, 0.5]), np.array([1.0, 2.0, 3.0]))
        edges = np.array([0, 1, 2])
        other = np.array([1, 3, 0])
        for terms in (dense, linear):
            tables = terms.tables(edges, 4)
            as_head = terms.rows(edges, other, np.array([True, True, True]), 4)
            as_tail = terms.rows(edges, other, np.array([False, False, False]), 4)
            for k in range(3):
                np.testing.assert_allclose(as_head[k], tables[k][:, other[k]])
                np.testing.assert_allclose(as_tail[k], tables[k][other[k], :])

    def test_storage_interface_is_abstract(self):
        """Test the base storage cannot be instantiated and a partial subclass neither"""
        with pytest.raises(TypeError):
            PairwiseTerms()

        class CostOnly(PairwiseTerms):
            def cost(self, edges, a, b):
                return np.zeros(len(edges))

        with pytest.raises(TypeError):
            CostOnly()

    def test_color_keys_identify_equal_potentials(self):
        terms = TruncatedLinearTerms(np.array([1.0, 1.0, 2.0]), np.array([2.0, 2.0, 2.0]))
        keys = terms.color_keys()
        assert keys[0] == keys[1]
        assert keys[0] != keys[2]

    def test_symmetric_flags(self):
        tables = np.array([[[0.0, 1.0], [1.0, 0.0]], [[0.0, 1.0], [2.0, 0.0]]])
        np.testing.assert_array_equal(DenseTerms(tables).symmetric(), [True, False])


class TestLabeledMRF:
    """Test model construction and validation"""

    def test_label_set_must_be_non_empty(self):
        with pytest.raises(ContractViolation):
            LabelSet(0)

    def test_grid_edges_horizontal_then_vertical(self):
        """Test edge order on a 3x2 grid"""
        heads, tails = grid_edges(3, 2)
        assert list(zip(heads.tolist(), tails.tolist())) == [(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)]

    def test_rejects_self_loop(self):
        with pytest.raises(ContractViolation):
            LabeledMRF.from_edges([[0.0], [0.0]], [(1, 1, PairwiseSpec.potts(1.0))])

    def test_rejects_duplicate_undirected_edge(self):
        with pytest.raises(ContractViolation):
            LabeledMRF.from_edges(
                [[0.0, 1.0], [0.0, 1.0]],
                [(0, 1, PairwiseSpec.potts(1.0)), (1, 0, PairwiseSpec.potts(1.0))],
            )

    def test_rejects_out_of_range_edge(self):
        with pytest.raises(ContractViolation):
            LabeledMRF.from_edges([[0.0, 1.0]], [(0, 1, PairwiseSpec.potts(1.0))])

    def test_rejects_non_finite_unaries(self):
        with pytest.raises(ContractViolation):
            LabeledMRF.from_edges([[0.0, math.inf]], [])

    def test_rejects_wrong_grid_dims(self):
        heads, tails = grid_edges(2, 2)
        terms = TruncatedLinearTerms(np.ones(len(heads)), np.ones(len(heads)))
        with pytest.raises(ContractViolation):
            LabeledMRF(np.zeros((4, 2)), heads, tails, terms, grid_dims=(3, 2))

    def test_mixed_edge_list_densifies(self):
        mrf = LabeledMRF.from_edges(
            [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
            [(0, 1, PairwiseSpec.potts(1.0)), (1, 2, PairwiseSpec.dense([[0.0, 2.0], [3.0, 0.0]]))],
        )
        assert isinstance(mrf.pairwise, DenseTerms)
        assert energy(mrf, [0, 1, 0]) == 1.0 + 3.0

    def test_incidence_lists_every_edge_twice(self, grid_mrf_factory):
        mrf = grid_mrf_factory(3, 3, 2, seed=0)
        offsets, edge_ids, _ = mrf.incidence
        assert offsets[-1] == 2 * mrf.num_edges
        np.testing.assert_array_equal(np.bincount(edge_ids), np.full(mrf.num_edges, 2))


class TestEnergy:
    """Test energy evaluation"""

    def test_single_unary(self):
        mrf = LabeledMRF.from_edges([[3.0, 5.0]], [])
        assert energy(mrf, [0]) == 3.0

    def test_chain_hand_sum(self, chain_mrf):
        assert energy(chain_mrf, [0, 1]) == 1.0

    def test_rejects_wrong_length(self, chain_mrf):
        with pytest.raises(ContractViolation):
            energy(chain_mrf, [0])

    def test_rejects_label_out_of_range(self, chain_mrf):
        with pytest.raises(ContractViolation):
            energy(chain_mrf, [0, 2])

    def test_linear_in_potentials(self, grid_mrf_factory):
        """Test scaling every potential by c scales the energy by c"""
        mrf = grid_mrf_factory(3, 3, 3, seed=4)
        rng = np.random.default_rng(5)
        for _ in range(10):
            x = rng.integers(0, 3, size=9)
            assert energy(mrf.scaled(2.5), x) == pytest.approx(2.5 * energy(mrf, x), rel=1e-12)

    def test_permutation_equivariant(self, grid_mrf_factory):
        """Test relabelling variables leaves the energy of the permuted assignment unchanged"""
        mrf = grid_mrf_factory(3, 2, 3, seed=6)
        rng = np.random.default_rng(7)
        perm = rng.permutation(mrf.num_vars)
        unaries = np.empty_like(mrf.unaries)
        unaries[perm] = mrf.unaries
        permuted = LabeledMRF(unaries, perm[mrf.heads], perm[mrf.tails], mrf.pairwise)
        x = rng.integers(0, 3, size=mrf.num_vars)
        y = np.empty_like(x)
        y[perm] = x
        assert energy(permuted, y) == pytest.approx(energy(mrf, x), rel=1e-12)


class TestBruteForce:
    """Test the exhaustive MAP oracle"""

    def test_single_variable(self):
        x, value = brute_force_map(LabeledMRF.from_edges([[3.0, 5.0]], []))
        assert x.tolist() == [0]
        assert value == 3.0

    def test_strong_potts_edge_follows_stronger_unary(self, potts_pair_mrf):
        x, value = brute_force_map(potts_pair_mrf)
        assert x.tolist() == [0, 0]
        assert value == 2.0

    def test_ties_go_to_lexicographically_smallest(self):
        mrf = LabeledMRF.from_edges([[1.0, 1.0], [2.0, 2.0]], [])
        x, _ = brute_force_map(mrf)
        assert x.tolist() == [0, 0]

    def test_matches_independent_enumeration(self, grid_mrf_factory):
        """Test against itertools enumeration in a different traversal order"""
        mrf = grid_mrf_factory(3, 3, 2, seed=11)
        _, value = brute_force_map(mrf)
        best = min(
            energy(mrf, np.array(x)) for x in itertools.product(range(2), repeat=mrf.num_vars)
        )
        assert value == pytest.approx(best, rel=1e-12)

    def test_lower_bounds_every_assignment(self, grid_mrf_factory):
        mrf = grid_mrf_factory(2, 2, 3, seed=12)
        _, value = brute_force_map(mrf)
        for x in itertools.product(range(3), repeat=4):
            assert value <= energy(mrf, np.array(x)) + 1e-12

    def test_small_chunks_agree(self, grid_mrf_factory):
        mrf = grid_mrf_factory(3, 2, 3, seed=13)
        x_big, value_big = brute_force_map(mrf)
        x_small, value_small = brute_force_map(mrf, chunk=7)
        np.testing.assert_array_equal(x_big, x_small)
        assert value_big == value_small

    def test_cap_exceeded_names_cap(self, grid_mrf_factory):
        mrf = grid_mrf_factory(3, 3, 2, seed=0)
        with pytest.raises(EnumerationCapExceeded, match="10"):
            brute_force_map(mrf, cap=10)
