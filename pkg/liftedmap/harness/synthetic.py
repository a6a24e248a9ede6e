"""
Synthetic instances
Deterministic stereo pairs with analytic disparity and seeded spike images
for segmentation, plus the `gen` command that writes them as NetPBM files.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np

from liftedmap.core.exceptions import ContractViolation
from liftedmap.io.netpbm import write_netpbm
from liftedmap.pipelines.segmentation import UNSEEDED

logger = logging.getLogger(__name__)

# default label counts of the bundled pairs, by image size
BUNDLED_DISPARITIES = {64: 16, 96: 32}


@dataclass(frozen=True)
class Layer:
    """Axis-aligned rectangle at constant disparity (x0, y0 inclusive, x1, y1 exclusive)"""

    x0: int
    y0: int
    x1: int
    y1: int
    disparity: int


@dataclass(frozen=True)
class StereoInstance:
    left: np.ndarray
    right: np.ndarray
    truth: np.ndarray
    max_disparity: int


@dataclass(frozen=True)
class SegmentationInstance:
    image: np.ndarray
    seeds: np.ndarray
    truth: np.ndarray
    num_labels: int


def textured(rng: np.random.Generator, height: int, width: int, block: int, contrast: int = 128) -> np.ndarray:
    """Random colour blocks within 128 +- contrast plus mild per-pixel noise, uint8 (H, W, 3)"""
    coarse = rng.integers(128 - contrast, 128 + contrast, size=(height // block + 1, width // block + 1, 3))
    image = np.repeat(np.repeat(coarse, block, axis=0), block, axis=1)[:height, :width]
    noise = rng.integers(-4, 5, size=(height, width, 3))
    return np.clip(image + noise, 0, 255).astype(np.uint8)


def layered_disparity(width: int, height: int, background: int, layers: Sequence[Layer]) -> np.ndarray:
    truth = np.full((height, width), background, dtype=np.int64)
    for layer in layers:
        truth[layer.y0:layer.y1, layer.x0:layer.x1] = layer.disparity
    return truth


def default_layers(size: int, max_disparity: int) -> list[Layer]:
    """Five overlapping rectangles spread over the disparity range"""
    eighth, d = size // 8, max_disparity
    return [
        Layer(eighth, eighth, 4 * eighth, 4 * eighth, d // 4),
        Layer(2 * eighth, 2 * eighth, 3 * eighth + eighth // 2, 3 * eighth + eighth // 2, (3 * d) // 8),
        Layer(4 * eighth, eighth, 7 * eighth, 3 * eighth, d // 2),
        Layer(eighth, 5 * eighth, 5 * eighth, 7 * eighth, (5 * d) // 8),
        Layer(5 * eighth, 4 * eighth, 7 * eighth, 7 * eighth, (3 * d) // 4),
    ]


def make_stereo_pair(
    size: int,
    max_disparity: Optional[int] = None,
    seed: int = 0,
    background: Optional[int] = None,
    layers: Optional[Sequence[Layer]] = None,
    block: int = 2,
    contrast: int = 48,
) -> StereoInstance:
    """
    Square stereo pair with known disparity

    The right image is a random texture; the left image is built from it as
    left[y, x] = right[y, x - d(x, y)], with fresh texture where x - d < 0.
    By default a background plane carries five rectangles at larger
    disparities, and the texture is weak enough that many pixels match
    several disparities almost equally well.
    """
    if size < 1:
        raise ContractViolation("size must be >= 1")
    max_disparity = max_disparity or BUNDLED_DISPARITIES.get(size, max(2, size // 4))
    background = max_disparity // 8 if background is None else background
    if layers is None:
        layers = default_layers(size, max_disparity)
    truth = layered_disparity(size, size, background, layers)
    if truth.min() < 0 or truth.max() >= max_disparity:
        raise ContractViolation(f"Disparities must lie in 0..{max_disparity - 1}")

    rng = np.random.default_rng(seed)
    right = textured(rng, size, size, block, contrast)
    fill = textured(rng, size, size, block, contrast)
    rows, cols = np.indices((size, size))
    source = cols - truth
    inside = source >= 0
    left = fill.copy()
    left[inside] = right[rows[inside], source[inside]]
    logger.info(f"Generated {size}x{size} stereo pair with {max_disparity} disparities")
    return StereoInstance(left=left, right=right, truth=truth, max_disparity=max_disparity)


def make_spike_image(
    size: int,
    spike_width: int = 1,
    seed: int = 0,
    num_labels: int = 2,
    noise: int = 8,
    contrast: int = 20,
) -> SegmentationInstance:
    """
    Square object with a long thin spike, barely brighter than the background

    Label 1 is the object and its spike, label 0 the background; with three
    labels a disc barely darker than the background takes label 2. Regions
    differ by `contrast` per channel, close to the noise level, so boundary
    edges keep most of their weight and pairwise smoothing alone cuts the
    spike off. A few pixels deep inside each region are seeded.
    """
    if size < 8:
        raise ContractViolation("Spike images need size >= 8")
    if num_labels not in (2, 3):
        raise ContractViolation("Spike images have 2 or 3 labels")
    rng = np.random.default_rng(seed)
    truth = np.zeros((size, size), dtype=np.int64)
    side = max(size // 4, 3)
    top, left = size // 2 - side // 2, size // 16 + 1
    truth[top:top + side, left:left + side] = 1
    mid = top + side // 2
    width = max(spike_width, 1)
    truth[mid - width // 2:mid - width // 2 + width, left + side:size - 2] = 1
    disc_row, disc_col = (3 * size) // 4, size // 4
    if num_labels == 3:
        rows, cols = np.indices((size, size))
        radius = max(size // 8, 1)
        truth[(rows - disc_row) ** 2 + (cols - disc_col) ** 2 <= radius ** 2] = 2

    background = np.array([110, 120, 110])
    palette = np.stack([background, background + contrast, background - contrast])
    image = palette[truth] + rng.integers(-noise, noise + 1, size=(size, size, 3))
    image = np.clip(image, 0, 255).astype(np.uint8)

    seeds = np.full((size, size), UNSEEDED, dtype=np.int64)
    seeds[0, :] = 0
    seeds[:, 0] = 0
    centre = left + side // 2
    seeds[mid - 1:mid + 2, centre - 1:centre + 2] = 1
    if num_labels == 3:
        seeds[disc_row - 1:disc_row + 2, disc_col] = 2
        seeds[disc_row, disc_col - 1:disc_col + 2] = 2
    # drop seeds that landed outside their region
    seeded = seeds != UNSEEDED
    seeds[seeded & (seeds != truth)] = UNSEEDED
    return SegmentationInstance(image=image, seeds=seeds, truth=truth, num_labels=num_labels)


def generate(
    kind: Literal["stereo", "segment"],
    size: int,
    seed: int,
    out: Path,
    labels: Optional[int] = None,
) -> list[Path]:
    """Write a synthetic instance and its ground truth into out"""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "stereo":
        pair = make_stereo_pair(size, max_disparity=labels, seed=seed)
        written = [
            write_netpbm(out / "left.ppm", pair.left),
            write_netpbm(out / "right.ppm", pair.right),
            # raw disparities, not rescaled
            write_netpbm(out / "truth.pgm", pair.truth),
        ]
    else:
        instance = make_spike_image(size, seed=seed, num_labels=labels or 2)
        written = [
            write_netpbm(out / "image.ppm", instance.image),
            write_netpbm(out / "seeds.pgm", instance.seeds),
            write_netpbm(out / "truth.pgm", instance.truth),
        ]
    logger.info(f"Wrote synthetic {kind} instance to {out}")
    return written
