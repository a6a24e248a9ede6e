"""Test configuration and fixtures"""
import numpy as np
import pytest

from liftedmap.harness.synthetic import Layer, make_spike_image, make_stereo_pair
from liftedmap.mrf.model import DenseTerms, LabeledMRF, TruncatedLinearTerms, grid_edges
from liftedmap.pipelines.segmentation import SegmentationProblem
from liftedmap.schemas.criteria import StoppingCriteria
from liftedmap.schemas.problems import SegmentationParams


def random_grid_mrf(
    width: int,
    height: int,
    num_labels: int,
    seed: int,
    form: str = "dense",
) -> LabeledMRF:
    """
    Seeded random grid MRF

    form is "dense" (arbitrary random tables), "potts" or "linear"
    (truncated linear, truncation 2). Unaries are non-negative.
    """
    rng = np.random.default_rng(seed)
    heads, tails = grid_edges(width, height)
    unaries = rng.uniform(0.0, 5.0, size=(width * height, num_labels))
    if form == "dense":
        terms = DenseTerms(rng.uniform(0.0, 3.0, size=(len(heads), num_labels, num_labels)))
    else:
        truncation = 1.0 if form == "potts" else 2.0
        terms = TruncatedLinearTerms(rng.uniform(0.5, 2.0, size=len(heads)), np.full(len(heads), truncation))
    return LabeledMRF(unaries, heads, tails, terms, grid_dims=(width, height))


@pytest.fixture
def grid_mrf_factory():
    """Factory for seeded random grid MRFs"""
    return random_grid_mrf


@pytest.fixture
def chain_mrf():
    """Two variables, unaries [[0,1],[1,0]], pairwise |a - b|"""
    return LabeledMRF(
        [[0.0, 1.0], [1.0, 0.0]],
        [0],
        [1],
        DenseTerms(np.array([[[0.0, 1.0], [1.0, 0.0]]])),
    )


@pytest.fixture
def potts_pair_mrf():
    """Two variables pulled apart by their unaries and held together by a strong Potts edge"""
    return LabeledMRF(
        [[0.0, 3.0], [2.0, 0.0]],
        [0],
        [1],
        TruncatedLinearTerms(np.array([10.0]), np.array([1.0])),
    )


@pytest.fixture
def criteria():
    """Default stopping criteria (K = 4 moves)"""
    return StoppingCriteria(no_improve_rounds=4)


@pytest.fixture
def small_stereo_pair():
    """16x16 pair: disparity-3 textured square on a disparity-0 background, 8 labels"""
    return make_stereo_pair(
        16,
        max_disparity=8,
        seed=7,
        background=0,
        layers=[Layer(4, 4, 12, 12, 3)],
        block=1,
        contrast=128,
    )


@pytest.fixture
def spike_problem():
    """12x12 two-label spike image as a segmentation problem"""
    instance = make_spike_image(12, spike_width=1, seed=3)
    return SegmentationProblem(instance.image, instance.seeds, SegmentationParams(num_labels=2))
