"""
Tests for color passing partitions and the threshold baseline
"""
import numpy as np
import pytest

from liftedmap.core.exceptions import ContractViolation
from liftedmap.mrf.color_passing import (
    CPSpec,
    advance,
    color_passing_round,
    cp,
    init_colors,
    match_threshold,
    partition_from_colors,
    run_to_fixed_point,
    split_by_next_label,
    threshold_partition,
    unary_signatures,
)
from liftedmap.mrf.model import LabeledMRF, TruncatedLinearTerms, grid_edges
from liftedmap.mrf.partition import Partition, is_coarser


def uniform_grid(width: int, height: int, num_labels: int = 3) -> LabeledMRF:
    heads, tails = grid_edges(width, height)
    terms = TruncatedLinearTerms(np.ones(len(heads)), np.full(len(heads), 2.0))
    return LabeledMRF(np.zeros((width * height, num_labels)), heads, tails, terms, grid_dims=(width, height))


class TestInitialColors:
    """Test the initial coloring"""

    def test_zero_rounds_is_one_element(self, grid_mrf_factory):
        mrf = grid_mrf_factory(3, 3, 3, seed=0)
        assert cp(mrf, 2, 0) == Partition.single(9)

    def test_unary_signature_ties_to_lowest_label(self):
        mrf = LabeledMRF([[1.0, 0.0, 0.0]], [], [], TruncatedLinearTerms(np.zeros(0), np.zeros(0)))
        np.testing.assert_array_equal(unary_signatures(mrf, 3), [[1, 2, 0]])

    @pytest.mark.parametrize("n_l", [0, 4])
    def test_split_threshold_range(self, grid_mrf_factory, n_l):
        mrf = grid_mrf_factory(2, 2, 3, seed=0)
        with pytest.raises(ContractViolation):
            init_colors(mrf, n_l)

    def test_cp_spec_validation(self):
        with pytest.raises(ContractViolation):
            CPSpec(0, 1)
        with pytest.raises(ContractViolation):
            CPSpec(1, -1)
        assert str(CPSpec(2, 3)) == "CP(2,3)"


class TestColorPassingRound:
    """Test partitions produced by color passing rounds"""

    def test_uniform_grid_splits_by_degree(self):
        """Test a uniform 3x3 grid separates corners, edge midpoints and the centre"""
        p = cp(uniform_grid(3, 3), 1, 1)
        assert p.num_elements == 3
        assert p.element_of[0] == p.element_of[2] == p.element_of[6] == p.element_of[8]
        assert p.element_of[1] == p.element_of[3] == p.element_of[5] == p.element_of[7]
        assert p.element_of[4] not in (p.element_of[0], p.element_of[1])

    def test_unary_orders_separate_variables(self):
        """Test one round separates variables with different best labels"""
        mrf = LabeledMRF(
            [[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]],
            [],
            [],
            TruncatedLinearTerms(np.zeros(0), np.zeros(0)),
        )
        assert cp(mrf, 1, 1) == Partition([0, 1, 0])

    def test_rounds_only_refine(self, grid_mrf_factory):
        """Test CP(N_L, n) is coarser than CP(N_L, n + 1)"""
        for seed in range(20):
            mrf = grid_mrf_factory(4, 3, 3, seed=seed, form="linear")
            for n_l in (1, 2):
                state = init_colors(mrf, n_l)
                for _ in range(3):
                    successor = color_passing_round(state, mrf)
                    assert is_coarser(partition_from_colors(state), partition_from_colors(successor))
                    state = successor

    def test_label_split_only_refines(self, grid_mrf_factory):
        for seed in range(20):
            mrf = grid_mrf_factory(3, 3, 3, seed=seed, form="linear")
            state = color_passing_round(init_colors(mrf, 1), mrf)
            split = split_by_next_label(state, mrf)
            assert split.n_l == 2
            assert is_coarser(partition_from_colors(state), partition_from_colors(split))

    def test_split_beyond_label_count(self, grid_mrf_factory):
        mrf = grid_mrf_factory(2, 2, 2, seed=0)
        with pytest.raises(ContractViolation):
            split_by_next_label(init_colors(mrf, 2), mrf)

    def test_split_before_any_round_matches_init(self, grid_mrf_factory):
        """Test a split at zero rounds lands on the same state as starting at the higher N_L"""
        for seed in range(10):
            mrf = grid_mrf_factory(3, 3, 3, seed=seed, form="linear")
            split = split_by_next_label(init_colors(mrf, 1), mrf)
            fresh = init_colors(mrf, 2)
            assert partition_from_colors(split) == partition_from_colors(fresh)
            assert Partition(split.unary_colors) == Partition(fresh.unary_colors)
            assert partition_from_colors(advance(split, mrf, CPSpec(2, 1))) == cp(mrf, 2, 1)

    def test_fixed_point_within_num_vars_rounds(self, grid_mrf_factory):
        for seed in range(20):
            mrf = grid_mrf_factory(3, 3, 3, seed=seed, form="linear")
            state = run_to_fixed_point(mrf, 1)
            assert state.n_iter <= mrf.num_vars
            assert partition_from_colors(color_passing_round(state, mrf)) == partition_from_colors(state)

    def test_round_rejects_foreign_state(self, grid_mrf_factory):
        state = init_colors(grid_mrf_factory(2, 2, 2, seed=0), 1)
        with pytest.raises(ContractViolation):
            color_passing_round(state, grid_mrf_factory(3, 3, 2, seed=0))


class TestAdvance:
    """Test extending one color-passing lineage"""

    def test_advance_matches_cp_for_same_threshold(self, grid_mrf_factory):
        mrf = grid_mrf_factory(3, 3, 3, seed=2, form="linear")
        state = advance(init_colors(mrf, 1), mrf, CPSpec(1, 2))
        assert partition_from_colors(state) == cp(mrf, 1, 2)

    def test_advance_is_finer_than_its_origin(self, grid_mrf_factory):
        mrf = grid_mrf_factory(3, 3, 3, seed=3, form="linear")
        origin = advance(init_colors(mrf, 1), mrf, CPSpec(1, 1))
        target = advance(origin, mrf, CPSpec(3, 1))
        assert (target.n_l, target.n_iter) == (3, 1)
        assert is_coarser(partition_from_colors(origin), partition_from_colors(target))

    def test_advance_cannot_go_back(self, grid_mrf_factory):
        mrf = grid_mrf_factory(2, 2, 3, seed=0)
        state = advance(init_colors(mrf, 2), mrf, CPSpec(2, 1))
        with pytest.raises(ContractViolation):
            advance(state, mrf, CPSpec(1, 1))


class TestThresholdPartition:
    """Test the unary-distance threshold baseline"""

    def test_zero_threshold_is_degenerate(self, grid_mrf_factory):
        mrf = grid_mrf_factory(3, 3, 3, seed=0)
        assert threshold_partition(mrf, 0.0).is_degenerate

    def test_huge_threshold_is_single(self, grid_mrf_factory):
        mrf = grid_mrf_factory(3, 3, 3, seed=0)
        assert threshold_partition(mrf, 1e9) == Partition.single(9)

    def test_joins_first_close_representative(self):
        mrf = LabeledMRF(
            [[0.0, 0.0], [10.0, 0.0], [0.5, 0.0], [10.0, 0.5]],
            [],
            [],
            TruncatedLinearTerms(np.zeros(0), np.zeros(0)),
        )
        assert threshold_partition(mrf, 1.0) == Partition([0, 1, 0, 1])

    def test_negative_threshold(self, grid_mrf_factory):
        with pytest.raises(ContractViolation):
            threshold_partition(grid_mrf_factory(2, 2, 2, seed=0), -1.0)

    def test_match_threshold_hits_single_element_target(self, grid_mrf_factory):
        mrf = grid_mrf_factory(3, 3, 3, seed=4)
        threshold, partition = match_threshold(mrf, 1)
        assert partition.num_elements == 1
        assert threshold > 0
