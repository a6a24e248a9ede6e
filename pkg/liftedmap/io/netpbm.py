"""
NetPBM images
8-bit PGM (P2 plain, P5 binary) and PPM (P3 plain, P6 binary) as numpy
arrays: (H, W) for grey maps, (H, W, 3) for colour.
"""
from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Union

import numpy as np

from liftedmap.core.exceptions import ContractViolation, InputError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_CHANNELS = {b"P2": 1, b"P5": 1, b"P3": 3, b"P6": 3}
_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header(data: bytes, path: PathLike) -> tuple[bytes, int, int, int, int]:
    """Magic, width, height, maxval and raster offset"""
    fields = []
    position = 0
    for _ in range(4):
        match = _TOKEN.match(data, position)
        if match is None:
            raise InputError(f"{path}: truncated NetPBM header")
        fields.append(match.group(1))
        position = match.end()
    magic = fields[0]
    if magic not in _CHANNELS:
        raise InputError(f"{path}: unsupported NetPBM magic {magic!r}")
    try:
        width, height, maxval = (int(v) for v in fields[1:])
    except ValueError as exc:
        raise InputError(f"{path}: malformed NetPBM header") from exc
    if width < 1 or height < 1:
        raise InputError(f"{path}: empty image {width}x{height}")
    if not 0 < maxval <= 255:
        raise InputError(f"{path}: only 8-bit images are supported (maxval {maxval})")
    # one whitespace byte separates the header from a binary raster
    return magic, width, height, maxval, position + 1


def decode_netpbm(data: bytes, path: PathLike = "<bytes>") -> np.ndarray:
    """
    Decode PGM/PPM bytes to uint8

    Raises:
        InputError: If the data is not an 8-bit P2/P3/P5/P6 image
    """
    magic, width, height, maxval, offset = _header(data, path)
    channels = _CHANNELS[magic]
    count = width * height * channels
    if magic in (b"P5", b"P6"):
        raster = data[offset:offset + count]
        if len(raster) < count:
            raise InputError(f"{path}: raster has {len(raster)} bytes, expected {count}")
        values = np.frombuffer(raster, dtype=np.uint8).astype(np.int64)
    else:
        try:
            values = np.array([int(token) for token in data[offset - 1:].split()], dtype=np.int64)
        except ValueError as exc:
            raise InputError(f"{path}: non-numeric sample in plain raster") from exc
        if values.size != count:
            raise InputError(f"{path}: raster has {values.size} samples, expected {count}")
    if values.size and values.max() > maxval:
        raise InputError(f"{path}: sample exceeds maxval {maxval}")
    if maxval != 255:
        values = np.rint(values * (255.0 / maxval)).astype(np.int64)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return values.astype(np.uint8).reshape(shape)


def read_netpbm(path: PathLike) -> np.ndarray:
    """Read a PGM or PPM file"""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"Cannot read image {path}: {exc}") from exc
    image = decode_netpbm(data, path)
    logger.debug(f"Read {path} with shape {image.shape}")
    return image


def encode_netpbm(image, plain: bool = False) -> bytes:
    """
    Encode an (H, W) or (H, W, 3) array of 0..255 values

    Raises:
        ContractViolation: If the array has another shape or range
    """
    image = np.asarray(image)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[:, :, 0]
    if not (image.ndim == 2 or (image.ndim == 3 and image.shape[2] == 3)):
        raise ContractViolation(f"Cannot encode an image of shape {image.shape}")
    if image.size and (image.min() < 0 or image.max() > 255):
        raise ContractViolation("Pixel values must lie in 0..255")
    grey = image.ndim == 2
    height, width = image.shape[:2]
    magic = ("P2" if grey else "P3") if plain else ("P5" if grey else "P6")
    header = f"{magic}\n{width} {height}\n255\n".encode()
    pixels = image.astype(np.uint8)
    if not plain:
        return header + pixels.tobytes()
    rows = pixels.reshape(height, -1)
    return header + b"".join(" ".join(map(str, row.tolist())).encode() + b"\n" for row in rows)


def write_netpbm(path: PathLike, image, plain: bool = False) -> Path:
    path = Path(path)
    try:
        path.write_bytes(encode_netpbm(image, plain=plain))
    except OSError as exc:
        raise InputError(f"Cannot write image {path}: {exc}") from exc
    return path


def scale_to_bytes(labels, num_labels: int) -> np.ndarray:
    """Label map 0..|L|-1 stretched to 0..255 for display"""
    labels = np.asarray(labels, dtype=np.float64)
    if num_labels <= 1:
        return np.zeros(labels.shape, dtype=np.uint8)
    return np.rint(labels * (255.0 / (num_labels - 1))).astype(np.uint8)
