"""Gaussian-kernel Gram matrices and squared-MMD estimators.

The pooled Gram matrix over x1..xn, y1..ym is built once per test; both
estimators and every permuted relabeling are then evaluated purely by index
selection against it, which is what makes permutation testing affordable.

Estimators:

* biased   -  sum k(x,x')/n^2 + sum k(y,y')/m^2 - 2 sum k(x,y)/(nm), with
  same-index terms included; always >= 0 up to rounding.
* unbiased -  within-set sums over distinct indices normalized by n(n-1)
  and m(m-1); may be negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .distances import DistanceKind, feature_matrix
from .errors import DimensionError, DomainError, SizeError
from .samples import ImageShape, SampleSet


class Estimator(str, Enum):
    BIASED = "biased"
    UNBIASED = "unbiased"


@dataclass(frozen=True)
class KernelConfig:
    """Distance kind, bandwidth, and estimator for one test.

    ``sigma=None`` means: derive the bandwidth from the pooled baseline data
    with the median heuristic when the kernel matrix is built.
    """

    distance: DistanceKind = DistanceKind.EUCLIDEAN
    sigma: float | None = None
    estimator: Estimator = Estimator.BIASED

    def __post_init__(self):
        if self.sigma is not None and not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class MmdScore:
    value: float
    estimator: Estimator
    n: int
    m: int


class KernelMatrix:
    """Pooled symmetric Gram matrix with unit diagonal over x-rows then y-rows."""

    def __init__(self, gram: np.ndarray, n: int, m: int, sigma: float):
        gram = np.asarray(gram, dtype=np.float64)
        if gram.shape != (n + m, n + m):
            raise DimensionError(
                f"gram must be {(n + m, n + m)}, got {gram.shape}"
            )
        view = gram.view()
        view.flags.writeable = False
        self.gram = view
        self.n = int(n)
        self.m = int(m)
        self.sigma = float(sigma)
        self._row_sums = gram.sum(axis=0)

    @property
    def total(self) -> int:
        return self.n + self.m


def pairwise_sq_dists(feats: np.ndarray) -> np.ndarray:
    """All-pairs squared Euclidean distances, exactly symmetric, zero diagonal."""
    feats = np.asarray(feats, dtype=np.float64)
    sq = np.einsum("ij,ij->i", feats, feats)
    d = sq[:, None] + sq[None, :] - 2.0 * (feats @ feats.T)
    np.maximum(d, 0.0, out=d)
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    return d


def _median_sq_dist(dists: np.ndarray) -> float:
    iu = np.triu_indices(dists.shape[0], k=1)
    return float(np.median(dists[iu]))


def median_heuristic(
    pooled: SampleSet,
    distance: DistanceKind = DistanceKind.EUCLIDEAN,
    shape: ImageShape | None = None,
) -> float:
    """Bandwidth with sigma^2 = (median pairwise distance) / 2.

    At the median distance the kernel then evaluates to e^-1. Returns 1.0
    when all points coincide.
    """
    if len(pooled) < 2:
        raise SizeError("median heuristic needs at least 2 samples")
    feats = feature_matrix(pooled.data, shape or pooled.shape, distance)
    med = _median_sq_dist(pairwise_sq_dists(feats))
    if med == 0.0:
        return 1.0
    return math.sqrt(med / 2.0)


def build_kernel_matrix(
    x: SampleSet,
    y: SampleSet,
    cfg: KernelConfig,
    shape: ImageShape | None = None,
) -> KernelMatrix:
    """Gaussian Gram matrix k(z_i, z_j) = exp(-D(z_i, z_j) / (2 sigma^2))
    over the pooled samples; computed once and reused by all permutations.
    """
    if x.shape != y.shape:
        raise DimensionError(
            f"sample sets differ in shape: "
            f"{x.shape.height}x{x.shape.width}x{x.shape.channels} vs "
            f"{y.shape.height}x{y.shape.width}x{y.shape.channels}"
        )
    shape = shape or x.shape
    feats = feature_matrix(np.vstack([x.data, y.data]), shape, cfg.distance)
    dists = pairwise_sq_dists(feats)
    if cfg.sigma is not None:
        sigma = cfg.sigma
    else:
        med = _median_sq_dist(dists)
        sigma = math.sqrt(med / 2.0) if med > 0.0 else 1.0
    gram = np.exp(dists / (-2.0 * sigma * sigma))
    np.fill_diagonal(gram, 1.0)
    return KernelMatrix(gram, len(x), len(y), sigma)


def stats_for_masks(km: KernelMatrix, masks: np.ndarray, estimator: Estimator) -> np.ndarray:
    """Evaluate the chosen estimator for many relabelings at once.

    ``masks`` is (n+m, k) with column j the 0/1 indicator of which pooled
    rows play the x role in relabeling j; every column must select exactly
    ``km.n`` rows. Returns the k statistic values in column order.
    """
    n, m = km.n, km.m
    if estimator == Estimator.UNBIASED and (n < 2 or m < 2):
        raise SizeError(f"unbiased estimator needs n, m >= 2, got n={n}, m={m}")
    masks = np.asarray(masks, dtype=np.float64)
    if masks.ndim != 2 or masks.shape[0] != km.total:
        raise DimensionError(f"masks must be ({km.total}, k), got {masks.shape}")
    g = km.gram
    gm = g @ masks                                   # (T, k)
    cross = km._row_sums[:, None] - gm               # row sums restricted to y
    sxx = np.einsum("tk,tk->k", masks, gm)
    sxy = np.einsum("tk,tk->k", masks, cross)
    syy = np.einsum("tk,tk->k", 1.0 - masks, cross)
    if estimator == Estimator.BIASED:
        return sxx / (n * n) + syy / (m * m) - 2.0 * sxy / (n * m)
    # the Gram diagonal is exactly 1, so each within-set diagonal sums to its size
    return (
        (sxx - n) / (n * (n - 1))
        + (syy - m) / (m * (m - 1))
        - 2.0 * sxy / (n * m)
    )


def identity_mask(km: KernelMatrix) -> np.ndarray:
    mask = np.zeros((km.total, 1))
    mask[: km.n, 0] = 1.0
    return mask


def mmd2_for_labels(km: KernelMatrix, x_indices: np.ndarray, estimator: Estimator) -> float:
    """Statistic for one relabeling given the pooled indices playing the x role."""
    x_indices = np.asarray(x_indices)
    if x_indices.size != km.n:
        raise DimensionError(
            f"relabeling must assign exactly {km.n} rows to x, got {x_indices.size}"
        )
    mask = np.zeros((km.total, 1))
    mask[x_indices, 0] = 1.0
    if int(mask.sum()) != km.n:
        raise DimensionError("relabeling indices must be distinct")
    return float(stats_for_masks(km, mask, estimator)[0])


def mmd2_biased(km: KernelMatrix) -> MmdScore:
    """Biased squared-MMD estimate under the baseline labeling."""
    value = float(stats_for_masks(km, identity_mask(km), Estimator.BIASED)[0])
    return MmdScore(value, Estimator.BIASED, km.n, km.m)


def mmd2_unbiased(km: KernelMatrix) -> MmdScore:
    """Unbiased squared-MMD estimate under the baseline labeling; needs n, m >= 2."""
    value = float(stats_for_masks(km, identity_mask(km), Estimator.UNBIASED)[0])
    return MmdScore(value, Estimator.UNBIASED, km.n, km.m)
