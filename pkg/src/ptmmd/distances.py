"""Squared Euclidean distance and the two-level Haar perceptual distance.

The Haar feature of an image keeps only the directional detail components
(horizontal, vertical, diagonal) of two transform levels; averages are used
solely to feed the second level. Dropping the final average makes the Haar
distance a pseudo-metric: it cannot see a uniform brightness offset.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError
from .samples import ImageShape


class DistanceKind(str, Enum):
    EUCLIDEAN = "euclidean"
    HAAR = "haar"


def euclidean_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Sum of squared coordinate differences."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise DimensionError(f"length mismatch: {x.size} vs {y.size}")
    d = x - y
    return float(d @ d)


@dataclass(frozen=True)
class HaarLevel:
    """One orthonormal 2x2-block Haar transform level.

    Each output is half the input resolution; per block the four outputs
    carry exactly the energy of the four inputs.
    """

    average: np.ndarray
    horizontal: np.ndarray
    vertical: np.ndarray
    diagonal: np.ndarray


def haar_level(image: np.ndarray) -> HaarLevel:
    """Transform one H x W image (H, W even) by non-overlapping 2x2 blocks.

    For a block [[a, b], [c, d]] the outputs are (a+b+c+d)/2, (a+b-c-d)/2,
    (a-b+c-d)/2 and (a-b-c+d)/2: average, horizontal, vertical, diagonal.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"haar_level needs a 2-D image, got {img.ndim}-D")
    h, w = img.shape
    if h % 2 or w % 2:
        raise DimensionError(f"haar_level needs even dimensions, got {h}x{w}")
    a = img[0::2, 0::2]
    b = img[0::2, 1::2]
    c = img[1::2, 0::2]
    d = img[1::2, 1::2]
    return HaarLevel(
        average=(a + b + c + d) / 2.0,
        horizontal=(a + b - c - d) / 2.0,
        vertical=(a - b + c - d) / 2.0,
        diagonal=(a - b - c + d) / 2.0,
    )


def haar_feature_length(shape: ImageShape) -> int:
    per_channel = 3 * (shape.height // 2) * (shape.width // 2) + 3 * (
        shape.height // 4
    ) * (shape.width // 4)
    return per_channel * shape.channels


def haar_feature(x: np.ndarray, shape: ImageShape) -> np.ndarray:
    """Two-level directional feature vector of one flattened sample.

    Per channel: level-1 details of the image, then level-2 details of the
    level-1 average, each flattened row-major in (horizontal, vertical,
    diagonal) order; channels are concatenated last.
    """
    return haar_feature_matrix(np.asarray(x, dtype=np.float64).reshape(1, -1), shape)[0]


def haar_feature_matrix(rows: np.ndarray, shape: ImageShape) -> np.ndarray:
    """Vectorized ``haar_feature`` over a matrix of flattened samples."""
    shape.require_haar()
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != shape.pixels:
        raise DimensionError(
            f"expected rows of {shape.pixels} entries, got {rows.shape}"
        )
    n = rows.shape[0]
    imgs = rows.reshape(n, shape.height, shape.width, shape.channels)
    pieces = []
    for ci in range(shape.channels):
        chan = imgs[:, :, :, ci]
        avg1, h1, v1, d1 = _haar_level_batch(chan)
        pieces += [h1.reshape(n, -1), v1.reshape(n, -1), d1.reshape(n, -1)]
        _, h2, v2, d2 = _haar_level_batch(avg1)
        pieces += [h2.reshape(n, -1), v2.reshape(n, -1), d2.reshape(n, -1)]
    return np.concatenate(pieces, axis=1)


def _haar_level_batch(imgs: np.ndarray):
    a = imgs[:, 0::2, 0::2]
    b = imgs[:, 0::2, 1::2]
    c = imgs[:, 1::2, 0::2]
    d = imgs[:, 1::2, 1::2]
    return (
        (a + b + c + d) / 2.0,
        (a + b - c - d) / 2.0,
        (a - b + c - d) / 2.0,
        (a - b - c + d) / 2.0,
    )


def haar_distance(x: np.ndarray, y: np.ndarray, shape: ImageShape) -> float:
    """Squared Euclidean distance between the two-level Haar features."""
    return euclidean_distance(haar_feature(x, shape), haar_feature(y, shape))


def feature_matrix(rows: np.ndarray, shape: ImageShape, kind: DistanceKind) -> np.ndarray:
    """Rows mapped into the space whose squared Euclidean metric realizes ``kind``."""
    if kind == DistanceKind.EUCLIDEAN:
        return np.asarray(rows, dtype=np.float64)
    return haar_feature_matrix(rows, shape)
