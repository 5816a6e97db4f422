"""Permutation-based p-values over a shared pooled kernel matrix.

The test statistic is computed once for the real labeling, then for N
uniformly random relabelings of the pooled samples into sizes (n, m); each
relabeling is a seeded Fisher-Yates shuffle of the pooled indices drawn from
its own PCG64 stream spawned off the master seed, so runs are reproducible
bit for bit and iterations are independent.

Two counting rules are provided:

* paper        -  p = #{theta_hat >  theta} / N        (can be exactly 0)
* conservative -  p = (1 + #{theta_hat >= theta}) / (N + 1)
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np

from .errors import CapacityError, SizeError
from .mmd import (
    KernelConfig,
    build_kernel_matrix,
    identity_mask,
    stats_for_masks,
)
from .samples import SampleSet, SplitSpec, split


class TestMode(str, Enum):
    __test__ = False  # keep pytest from collecting this as a test class

    PAPER_STRICT = "paper"
    CONSERVATIVE = "conservative"


def derive_seed(master: int, *counters: int) -> int:
    """Deterministic child seed for repeat/iteration counters."""
    ss = np.random.SeedSequence(entropy=master, spawn_key=tuple(counters))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class TestConfig:
    __test__ = False  # not a pytest class

    permutations: int = 250
    seed: int = 0
    mode: TestMode = TestMode.PAPER_STRICT

    def __post_init__(self):
        if self.permutations < 1:
            raise SizeError(f"need at least 1 permutation, got {self.permutations}")


@dataclass(frozen=True)
class PermutationTestResult:
    baseline: float
    permuted: np.ndarray
    p_value: float
    n: int
    m: int
    sigma: float
    kernel: KernelConfig
    config: TestConfig


@dataclass(frozen=True)
class PValueSummary:
    """Mean and normal-approximation 95% half-width over repeated tests."""

    mean: float
    half_width_95: float
    samples: tuple[float, ...]
    count: int


def pvalue_from_counts(greater: int, greater_equal: int, trials: int, mode: TestMode) -> float:
    if mode == TestMode.PAPER_STRICT:
        return greater / trials
    return (1 + greater_equal) / (trials + 1)


def permutation_masks(total: int, n: int, permutations: int, seed: int) -> np.ndarray:
    """(total, permutations) 0/1 matrix; column i is the x-side indicator of
    the i-th relabeling, drawn from the i-th spawned child of ``seed``."""
    masks = np.zeros((total, permutations))
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(permutations)):
        rng = np.random.Generator(np.random.PCG64(child))
        order = rng.permutation(total)
        masks[order[:n], i] = 1.0
    return masks


def permutation_test(
    x: SampleSet,
    y: SampleSet,
    kcfg: KernelConfig,
    tcfg: TestConfig,
) -> PermutationTestResult:
    """Run the full resampling test and return baseline, null draws, and p."""
    km = build_kernel_matrix(x, y, kcfg)
    baseline = float(stats_for_masks(km, identity_mask(km), kcfg.estimator)[0])
    masks = permutation_masks(km.total, km.n, tcfg.permutations, tcfg.seed)
    permuted = stats_for_masks(km, masks, kcfg.estimator)
    p = pvalue_from_counts(
        int(np.count_nonzero(permuted > baseline)),
        int(np.count_nonzero(permuted >= baseline)),
        tcfg.permutations,
        tcfg.mode,
    )
    permuted.flags.writeable = False
    return PermutationTestResult(
        baseline=baseline,
        permuted=permuted,
        p_value=p,
        n=km.n,
        m=km.m,
        sigma=km.sigma,
        kernel=kcfg,
        config=tcfg,
    )


EXACT_SPLIT_BUDGET = 10_000


def exact_exceedance_counts(
    x: SampleSet, y: SampleSet, kcfg: KernelConfig
) -> tuple[int, int, int]:
    """Enumerate every split of the pooled rows into sizes (n, m).

    Returns (#splits with statistic > baseline, #splits with >= baseline,
    #splits). The baseline labeling is itself one of the splits.
    """
    n, m = len(x), len(y)
    splits = math.comb(n + m, n)
    if splits > EXACT_SPLIT_BUDGET:
        raise SizeError(
            f"C({n + m},{n}) = {splits} splits exceeds the exact-enumeration "
            f"budget of {EXACT_SPLIT_BUDGET}"
        )
    km = build_kernel_matrix(x, y, kcfg)
    baseline = float(stats_for_masks(km, identity_mask(km), kcfg.estimator)[0])
    masks = np.zeros((n + m, splits))
    for j, combo in enumerate(itertools.combinations(range(n + m), n)):
        masks[list(combo), j] = 1.0
    stats = stats_for_masks(km, masks, kcfg.estimator)
    return (
        int(np.count_nonzero(stats > baseline)),
        int(np.count_nonzero(stats >= baseline)),
        splits,
    )


def exact_permutation_pvalue(
    x: SampleSet, y: SampleSet, kcfg: KernelConfig, mode: TestMode
) -> float:
    """Brute-force oracle: the p-value over all distinct splits."""
    greater, greater_equal, splits = exact_exceedance_counts(x, y, kcfg)
    return pvalue_from_counts(greater, greater_equal, splits, mode)


SampleProvider = Callable[[int], SampleSet]


def summarize_pvalues(pvalues) -> PValueSummary:
    ps = [float(p) for p in pvalues]
    if not ps:
        raise SizeError("cannot summarize zero p-values")
    mean = float(np.mean(ps))
    if len(ps) >= 2:
        half = 1.96 * float(np.std(ps, ddof=1)) / math.sqrt(len(ps))
    else:
        half = 0.0
    return PValueSummary(mean=mean, half_width_95=half, samples=tuple(ps), count=len(ps))


def monte_carlo_pvalues(
    x_source: SampleProvider,
    y_source: SampleProvider,
    sizes: tuple[int, int],
    repeats: int,
    kcfg: KernelConfig,
    tcfg: TestConfig,
    on_result: Callable[[int, PermutationTestResult], None] | None = None,
    jobs: int = 1,
) -> PValueSummary:
    """Repeat the test on fresh provider draws.

    Per-repeat seeds come from the master seed by counter and results are
    reduced in repeat order, so the summary is reproducible and independent
    of how many worker threads run the repeats.
    """
    if repeats < 1:
        raise SizeError(f"repeats must be positive, got {repeats}")
    n, m = sizes

    def run_one(r: int) -> PermutationTestResult:
        xs = x_source(r)
        ys = y_source(r)
        if len(xs) != n or len(ys) != m:
            raise CapacityError(
                f"repeat {r}: providers yielded sizes ({len(xs)}, {len(ys)}), "
                f"expected ({n}, {m})"
            )
        return permutation_test(
            xs, ys, kcfg, replace(tcfg, seed=derive_seed(tcfg.seed, r))
        )

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, range(repeats)))
    else:
        results = [run_one(r) for r in range(repeats)]
    if on_result is not None:
        for r, result in enumerate(results):
            on_result(r, result)
    return summarize_pvalues([result.p_value for result in results])


def subset_provider(
    source: SampleSet, size: int, repeats: int, seed: int, disjoint: bool = False
) -> SampleProvider:
    """Provider drawing ``size``-row subsets of a fixed pool.

    ``disjoint=True`` carves non-overlapping subsets out of one seeded
    shuffle (raises CapacityError when the pool is too small); otherwise each
    repeat is an independent seeded draw without replacement within the
    repeat.
    """
    if disjoint:
        parts = split(source, SplitSpec(seed=seed, sizes=(size,) * repeats))

        def provide(r: int) -> SampleSet:
            if r >= len(parts):
                raise CapacityError(f"disjoint provider exhausted at repeat {r}")
            return parts[r]

    else:
        if size > len(source):
            raise CapacityError(
                f"pool of {len(source)} rows cannot supply subsets of {size}"
            )

        def provide(r: int) -> SampleSet:
            rng = np.random.Generator(np.random.PCG64(derive_seed(seed, r)))
            rows = rng.permutation(len(source))[:size]
            return SampleSet(source.data[rows], source.shape, f"{source.label}/r{r}")

    return provide


def ecdf(values) -> list[tuple[float, float]]:
    """Empirical CDF as (value, cumulative probability) pairs, one per sample."""
    vals = sorted(float(v) for v in np.asarray(values, dtype=np.float64).ravel())
    if not vals:
        raise SizeError("cannot build an ECDF from zero values")
    k = len(vals)
    return [(v, (i + 1) / k) for i, v in enumerate(vals)]


def cdf_pairs(result: PermutationTestResult):
    """Baseline and permutation ECDFs of one test result.

    For a single test the baseline series is the lone observed statistic; the
    strict-exceedance p equals 1 minus the permutation ECDF at the baseline.
    """
    return ecdf([result.baseline]), ecdf(result.permuted)
