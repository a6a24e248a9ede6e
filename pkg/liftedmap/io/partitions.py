"""
Partition diagnostics
Plain-text dumps, element-size histograms and a colour rendering of the
largest lifted pixels.
"""
from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Union

import numpy as np

from liftedmap.core.exceptions import InputError
from liftedmap.io.netpbm import write_netpbm
from liftedmap.mrf.partition import Partition

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

LARGEST_SHOWN = 10


def dump_partition(path: PathLike, partition: Partition) -> Path:
    """One "variable element" line per variable"""
    path = Path(path)
    lines = (f"{i} {k}\n" for i, k in enumerate(partition.element_of.tolist()))
    with open(path, "w") as handle:
        handle.writelines(lines)
    return path


def load_partition(path: PathLike) -> Partition:
    """
    Read a dump written by dump_partition

    Raises:
        InputError: If the file is unreadable or variables are missing
    """
    try:
        rows = np.loadtxt(path, dtype=np.int64, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"Cannot read partition {path}: {exc}") from exc
    if rows.shape[1] != 2:
        raise InputError(f"{path}: expected two columns, got {rows.shape[1]}")
    element_of = np.full(rows.shape[0], -1, dtype=np.int64)
    variables = rows[:, 0]
    if variables.min() < 0 or variables.max() >= len(element_of):
        raise InputError(f"{path}: variable ids must cover 0..{len(element_of) - 1}")
    element_of[variables] = rows[:, 1]
    if np.any(element_of < 0):
        raise InputError(f"{path}: some variables have no element")
    return Partition(element_of)


def write_size_histogram(path: PathLike, partition: Partition) -> Path:
    """CSV of element size against number of elements with that size"""
    path = Path(path)
    sizes, counts = np.unique(partition.sizes, return_counts=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["element_size", "count"])
        writer.writerows(zip(sizes.tolist(), counts.tolist()))
    return path


def render_largest(partition: Partition, width: int, height: int, seed: int = 0) -> np.ndarray:
    """
    (H, W, 3) image colouring the ten largest elements

    Each of them gets a seeded random colour; every other pixel is black.
    Ties in size go to the element seen first.
    """
    sizes = partition.sizes
    order = np.argsort(-sizes, kind="stable")[:LARGEST_SHOWN]
    colors = np.random.default_rng(seed).integers(64, 256, size=(len(order), 3), dtype=np.int64)
    palette = np.zeros((partition.num_elements, 3), dtype=np.uint8)
    palette[order] = colors
    return palette[partition.element_of].reshape(height, width, 3)


def write_partition_diagnostics(
    directory: PathLike, index: int, partition: Partition, width: int, height: int, seed: int = 0
) -> list[Path]:
    """Dump, size histogram and largest-element rendering for one level"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = [
        dump_partition(directory / f"partition_level{index}.txt", partition),
        write_size_histogram(directory / f"partition_level{index}_sizes.csv", partition),
        write_netpbm(directory / f"partition_level{index}_largest.ppm", render_largest(partition, width, height, seed)),
    ]
    logger.info(
        f"Wrote partition diagnostics for level {index}",
        extra={"level_index": index, "num_elements": partition.num_elements},
    )
    return written
