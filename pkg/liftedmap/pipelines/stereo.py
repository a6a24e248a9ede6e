"""
Stereo matching MRF
Disparity labelling of the left image: windowed truncated absolute-difference
matching costs as unaries and colour-weighted truncated-linear smoothness on
the 4-connected grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from liftedmap.core.config import settings
from liftedmap.core.exceptions import ContractViolation
from liftedmap.mrf.model import LabeledMRF, TruncatedLinearTerms, grid_edges
from liftedmap.schemas.problems import StereoParams

logger = logging.getLogger(__name__)


def as_rgb(image) -> np.ndarray:
    """(H, W, 3) float copy of an 8-bit grey or RGB image"""
    image = np.asarray(image)
    if image.ndim == 2:
        image = np.repeat(image[:, :, None], 3, axis=2)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ContractViolation(f"Expected an (H, W) or (H, W, 3) image, got shape {image.shape}")
    return image.astype(np.float64)


@dataclass(frozen=True)
class StereoProblem:
    """A rectified left/right pair; disparity d matches left (x, y) with right (x - d, y)"""

    left: np.ndarray
    right: np.ndarray
    params: StereoParams = field(default_factory=StereoParams)

    def __post_init__(self):
        left, right = as_rgb(self.left), as_rgb(self.right)
        if left.shape != right.shape:
            raise ContractViolation(f"Left image {left.shape[:2]} and right image {right.shape[:2]} differ in size")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def height(self) -> int:
        return self.left.shape[0]

    @property
    def width(self) -> int:
        return self.left.shape[1]

    @property
    def num_labels(self) -> int:
        return self.params.max_disparity


def matching_costs(problem: StereoProblem) -> np.ndarray:
    """
    (H*W, |L|) window-aggregated matching costs

    Per-pixel cost is the channel-mean absolute difference, capped at the
    cost truncation, averaged over a (2r+1)^2 window. Disparities that look
    past the left edge of the right image get OUT_OF_FRAME_FACTOR times the
    largest achievable cost.
    """
    p = problem.params
    h, w = problem.height, problem.width
    size = 2 * p.window_radius + 1
    penalty = settings.OUT_OF_FRAME_FACTOR * p.cost_truncation
    columns = np.arange(w)
    costs = np.empty((h, w, p.max_disparity))
    for d in range(p.max_disparity):
        shifted = np.full_like(problem.right, np.nan)
        if d < w:
            shifted[:, d:, :] = problem.right[:, : w - d, :]
        raw = np.abs(problem.left - shifted).mean(axis=2)
        raw = np.minimum(np.nan_to_num(raw, nan=p.cost_truncation), p.cost_truncation)
        aggregated = ndimage.uniform_filter(raw, size=size, mode="nearest")
        aggregated[:, columns < d] = penalty
        costs[:, :, d] = aggregated
    return costs.reshape(h * w, p.max_disparity)


def color_difference(image: np.ndarray, heads: np.ndarray, tails: np.ndarray) -> np.ndarray:
    """Channel-summed absolute colour difference across each edge"""
    pixels = image.reshape(-1, 3)
    return np.abs(pixels[heads] - pixels[tails]).sum(axis=1)


def smoothness_weights(problem: StereoProblem, heads: np.ndarray, tails: np.ndarray) -> np.ndarray:
    """w_high / w_mid / w_low by the left-image colour difference against the two breakpoints"""
    p = problem.params
    diff = color_difference(problem.left, heads, tails)
    return np.select(
        [diff < p.color_breakpoint_low, diff < p.color_breakpoint_high],
        [p.w_high, p.w_mid],
        default=p.w_low,
    )


def build_stereo_mrf(problem: StereoProblem) -> LabeledMRF:
    """
    Stereo MRF over the left image's pixels (row-major)

    Raises:
        ContractViolation: If the images differ in size
    """
    heads, tails = grid_edges(problem.width, problem.height)
    weights = smoothness_weights(problem, heads, tails)
    terms = TruncatedLinearTerms(weights, np.full(len(weights), problem.params.smoothness_truncation))
    mrf = LabeledMRF(matching_costs(problem), heads, tails, terms, grid_dims=(problem.width, problem.height))
    logger.info(
        f"Built stereo MRF {problem.width}x{problem.height} with {problem.num_labels} disparities",
        extra={"task": "stereo"},
    )
    return mrf


def disparity_map(problem: StereoProblem, x) -> np.ndarray:
    """Assignment reshaped to the (H, W) disparity image"""
    return np.asarray(x, dtype=np.int64).reshape(problem.height, problem.width)
