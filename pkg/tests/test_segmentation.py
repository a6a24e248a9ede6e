"""
Tests for cooperative-cut segmentation
"""
import itertools
import math

import numpy as np
import pytest

from liftedmap.core.exceptions import ContractViolation
from liftedmap.harness.compare import pixel_error
from liftedmap.harness.synthetic import make_spike_image
from liftedmap.inference.c2f import RefinementSchedule, get_init_state, run_c2f
from liftedmap.mrf.color_passing import CPSpec
from liftedmap.mrf.model import energy
from liftedmap.pipelines.segmentation import (
    UNSEEDED,
    AuxiliaryState,
    CooperativeLevelSolver,
    SegmentationProblem,
    best_aux,
    build_segmentation_mrf,
    cluster_edge_groups,
    cogc_energy,
    concave,
    cut_weights,
    greedy_aux_descent,
    linearized_energy,
)
from liftedmap.schemas.criteria import StoppingCriteria
from liftedmap.schemas.problems import ConcaveSpec, SegmentationParams
from liftedmap.solvers import alpha_expansion
from liftedmap.solvers.trace import TraceEvent


def naive_cogc(problem: SegmentationProblem, x) -> float:
    """Double loop over (group, label) of the cut indicator"""
    groups = problem.groups
    total = sum(problem.unaries[i, x[i]] for i in range(len(x)))
    for g in range(groups.num_groups):
        for label in range(problem.num_labels):
            z = 0.0
            for e in groups.members(g):
                a, b = x[groups.heads[e]], x[groups.tails[e]]
                if (a == label and b != label) or (b == label and a != label):
                    z += problem.edge_weights[e]
            total += min(z, problem.params.concave.theta + problem.params.concave.epsilon * (z - problem.params.concave.theta))
    return total


def two_tone_problem(num_labels: int = 2) -> SegmentationProblem:
    """3x3 image: black first column, white elsewhere; one seed per tone"""
    image = np.full((3, 3, 3), 255, dtype=np.uint8)
    image[:, 0] = 0
    seeds = np.full((3, 3), UNSEEDED)
    seeds[0, 0] = 0
    seeds[0, 2] = 1
    return SegmentationProblem(image, seeds, SegmentationParams(num_labels=num_labels))


class TestEdgeGroups:
    """Test edge-group clustering"""

    def test_uniform_image_one_cell(self):
        groups = cluster_edge_groups(np.full((4, 4, 3), 80, dtype=np.uint8), 4, 16)
        assert groups.num_groups == 1
        assert len(groups.group_of) == 24

    def test_two_cells_split_by_position(self):
        groups = cluster_edge_groups(np.full((4, 8, 3), 80, dtype=np.uint8), 4, 4)
        assert groups.num_groups == 2

    def test_equal_contrast_boundaries_in_different_cells(self):
        """Test two boundaries with the same contrast land in different groups"""
        image = np.zeros((4, 16, 3), dtype=np.uint8)
        image[:, 4:8] = 200
        image[:, 12:16] = 200
        groups = cluster_edge_groups(image, 4, 8)
        first = np.flatnonzero((groups.heads == 3) & (groups.tails == 4))[0]
        second = np.flatnonzero((groups.heads == 11) & (groups.tails == 12))[0]
        assert groups.group_of[first] != groups.group_of[second]

    def test_contrast_splits_groups(self):
        image = np.zeros((2, 4, 3), dtype=np.uint8)
        image[:, 2:] = 255
        groups = cluster_edge_groups(image, 4, 16)
        assert groups.num_groups == 2

    def test_invalid_parameters(self):
        with pytest.raises(ContractViolation):
            cluster_edge_groups(np.zeros((2, 2, 3)), 0, 4)


class TestConcave:
    """Test the two-piece concave function"""

    def test_pieces(self):
        spec = ConcaveSpec(theta=4.0, epsilon=0.2)
        np.testing.assert_allclose(concave(spec, [0.0, 2.0, 4.0, 9.0]), [0.0, 2.0, 4.0, 5.0])

    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            ConcaveSpec(epsilon=1.0)


class TestCogcEnergy:
    """Test the cooperative objective"""

    def test_uniform_labeling_is_unary_sum(self, spike_problem):
        x = np.zeros(144, dtype=np.int64)
        assert cogc_energy(spike_problem, x) == pytest.approx(spike_problem.unaries[:, 0].sum())

    def test_single_cut_edge_counts_on_both_sides(self):
        image = np.full((1, 2, 3), 100, dtype=np.uint8)
        problem = SegmentationProblem(image, np.array([[0, 1]]), SegmentationParams(num_labels=2, edge_scale=2.0))
        assert problem.edge_weights.tolist() == [2.0]
        np.testing.assert_allclose(cut_weights(problem, [0, 1]), [[2.0, 2.0]])
        assert cogc_energy(problem, [0, 1]) == 4.0

    def test_matches_naive_double_loop(self, spike_problem):
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.integers(0, 2, size=144)
            assert cogc_energy(spike_problem, x) == pytest.approx(naive_cogc(spike_problem, x), rel=1e-9)

    def test_rejects_bad_labels(self, spike_problem):
        with pytest.raises(ContractViolation):
            cogc_energy(spike_problem, np.full(144, 2))


class TestSegmentationProblem:
    """Test seeds and unaries"""

    def test_missing_seed_names_label(self):
        image = np.zeros((2, 2, 3), dtype=np.uint8)
        seeds = np.array([[0, UNSEEDED], [UNSEEDED, UNSEEDED]])
        with pytest.raises(ContractViolation, match="Label 1"):
            SegmentationProblem(image, seeds, SegmentationParams(num_labels=2)).unaries

    def test_seed_label_out_of_range(self):
        with pytest.raises(ContractViolation):
            SegmentationProblem(np.zeros((1, 2, 3)), np.array([[0, 3]]), SegmentationParams(num_labels=2))

    def test_seed_shape_mismatch(self):
        with pytest.raises(ContractViolation):
            SegmentationProblem(np.zeros((2, 2, 3)), np.zeros((2, 3)), SegmentationParams(num_labels=1))

    def test_seeded_pixels_get_hard_unaries(self):
        problem = two_tone_problem()
        assert problem.unaries[0].tolist()[0] == 0.0
        assert problem.unaries[0, 1] > problem.unaries[1].max()


class TestLinearisation:
    """Test the linearised pairwise model"""

    def test_steep_modes_give_potts(self, spike_problem):
        aux = AuxiliaryState.steep(spike_problem.groups.num_groups, 2)
        mrf = build_segmentation_mrf(spike_problem, aux)
        tables = mrf.pairwise.tables(np.arange(mrf.num_edges), 2)
        w = spike_problem.edge_weights
        np.testing.assert_allclose(tables[:, 0, 1], 2.0 * w)
        np.testing.assert_allclose(tables[:, 1, 0], 2.0 * w)
        np.testing.assert_allclose(tables[:, 0, 0], 0.0)

    def test_upper_bound_tight_at_best_aux(self, spike_problem):
        rng = np.random.default_rng(1)
        shape = (spike_problem.groups.num_groups, 2)
        for _ in range(5):
            x = rng.integers(0, 2, size=144)
            aux = AuxiliaryState(rng.integers(0, 2, size=shape).astype(np.int8))
            assert linearized_energy(spike_problem, aux, x) >= cogc_energy(spike_problem, x) - 1e-9
            assert linearized_energy(spike_problem, best_aux(spike_problem, x), x) == pytest.approx(
                cogc_energy(spike_problem, x), rel=1e-9
            )

    def test_model_energy_plus_intercepts(self, spike_problem):
        rng = np.random.default_rng(2)
        shape = (spike_problem.groups.num_groups, 2)
        aux = AuxiliaryState(rng.integers(0, 2, size=shape).astype(np.int8))
        x = rng.integers(0, 2, size=144)
        intercepts = aux.intercepts(spike_problem.params.concave).sum()
        mrf = build_segmentation_mrf(spike_problem, aux)
        assert energy(mrf, x) + intercepts == pytest.approx(linearized_energy(spike_problem, aux, x), rel=1e-9)

    def test_rejects_wrong_aux_shape(self, spike_problem):
        with pytest.raises(ContractViolation):
            build_segmentation_mrf(spike_problem, AuxiliaryState.steep(1, 5))


class TestGreedyAuxDescent:
    """Test the alternating minimisation"""

    def test_trace_never_increases(self, spike_problem):
        start = np.argmin(spike_problem.unaries, axis=1)
        report = greedy_aux_descent(spike_problem, start, StoppingCriteria(no_improve_rounds=2))
        assert report.trace.is_monotone(1e-9)
        assert report.energy <= cogc_energy(spike_problem, start) + 1e-9
        assert report.energy == pytest.approx(cogc_energy(spike_problem, report.assignment))
        assert report.trace.rows[0].event == TraceEvent.START
        assert report.trace.rows[-1].event == TraceEvent.STOP

    def test_seed_pixels_keep_their_labels(self, spike_problem):
        start = np.argmin(spike_problem.unaries, axis=1)
        report = greedy_aux_descent(spike_problem, start, StoppingCriteria(no_improve_rounds=2))
        seeds = spike_problem.seeds.ravel()
        seeded = seeds != UNSEEDED
        np.testing.assert_array_equal(report.assignment[seeded], seeds[seeded])

    def test_optimal_start_is_kept(self):
        problem = two_tone_problem()
        start = np.array([0, 1, 1] * 3)
        report = greedy_aux_descent(problem, start, StoppingCriteria(no_improve_rounds=2))
        np.testing.assert_array_equal(report.assignment, start)

    def test_close_to_brute_force(self):
        """Test the final objective is within 10% of the exhaustive minimum on a 3x3 instance"""
        problem = two_tone_problem()
        best = min(cogc_energy(problem, np.array(x)) for x in itertools.product(range(2), repeat=9))
        start = np.argmin(problem.unaries, axis=1)
        report = greedy_aux_descent(problem, start, StoppingCriteria(no_improve_rounds=2))
        assert report.energy <= 1.1 * best + 1e-9

    def test_single_edge_converges_in_one_cycle(self):
        image = np.full((1, 2, 3), 100, dtype=np.uint8)
        problem = SegmentationProblem(image, np.array([[0, 1]]), SegmentationParams(num_labels=2))
        report = greedy_aux_descent(problem, [0, 1], StoppingCriteria(no_improve_rounds=2))
        assert report.assignment.tolist() == [0, 1]
        assert report.rounds == 2


class TestShortBoundaryBias:
    """Test the cooperative term keeps a thin low-contrast spike that plain pairwise smoothing cuts off"""

    SIZE = 32

    def solve_both(self, seed: int):
        """Run plain Potts and the cooperative descent from the same unary argmin start"""
        instance = make_spike_image(self.SIZE, seed=seed)
        params = SegmentationParams(num_labels=2, cell_size=self.SIZE)
        problem = SegmentationProblem(instance.image, instance.seeds, params)
        plain_model = build_segmentation_mrf(problem, AuxiliaryState.steep(problem.groups.num_groups, 2))
        start = get_init_state(plain_model)
        criteria = StoppingCriteria(no_improve_rounds=None)
        plain = alpha_expansion(plain_model, start, criteria).assignment
        cooperative = greedy_aux_descent(problem, start, criteria).assignment
        return instance, problem, plain, cooperative

    def test_concave_term_engages_on_the_boundary(self):
        for seed in range(4):
            instance = make_spike_image(self.SIZE, seed=seed)
            problem = SegmentationProblem(
                instance.image, instance.seeds, SegmentationParams(num_labels=2, cell_size=self.SIZE)
            )
            truth = instance.truth.ravel()
            assert cut_weights(problem, truth).max() > problem.params.concave.theta
            assert best_aux(problem, truth).modes.any()

    def test_cooperative_keeps_the_spike(self):
        plain_errors, cooperative_errors = [], []
        for seed in range(4):
            instance, _, plain, cooperative = self.solve_both(seed)
            shape = instance.truth.shape
            plain_errors.append(pixel_error(plain.reshape(shape), instance.truth, tolerance=0))
            cooperative_errors.append(pixel_error(cooperative.reshape(shape), instance.truth, tolerance=0))
        assert sum(plain_errors) > 0
        assert sum(cooperative_errors) < sum(plain_errors)

    def test_not_worse_than_plain_pairwise(self):
        """Test the cooperative objective of independent runs from the same start"""
        wins = 0
        for seed in range(10):
            _, problem, plain, cooperative = self.solve_both(seed)
            if cogc_energy(problem, cooperative) <= cogc_energy(problem, plain) + 1e-9:
                wins += 1
        assert wins >= 8


class TestCooperativeC2F:
    """Test coarse-to-fine runs of the cooperative objective"""

    def test_handoffs_and_final_objective(self, spike_problem):
        solver = CooperativeLevelSolver(spike_problem)
        schedule = RefinementSchedule([CPSpec(1, 2), CPSpec(1, 3)], StoppingCriteria(no_improve_rounds=2))
        report = run_c2f(solver.coloring_model, schedule, solver)
        rows = report.trace.rows
        for k in report.trace.events(TraceEvent.REFINE):
            assert rows[k].energy == pytest.approx(rows[k - 1].energy, abs=1e-9)
        assert report.energy == pytest.approx(cogc_energy(spike_problem, report.assignment))
        assert report.trace.is_monotone(1e-9)
        assert math.isfinite(report.energy)
