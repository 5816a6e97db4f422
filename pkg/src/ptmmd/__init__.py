"""Permutation-tested maximum mean discrepancy (PT-MMD) for sample sets.

A two-sample hypothesis test built from a Gaussian-kernel MMD statistic and
permutation resampling of the pooled samples, with a choice of squared
Euclidean or two-level Haar perceptual distance inside the kernel, plus a
quantized restricted Boltzmann machine harness for bitwidth and sigmoid
selection experiments.
"""

from .distances import (
    DistanceKind,
    HaarLevel,
    euclidean_distance,
    haar_distance,
    haar_feature,
    haar_feature_length,
    haar_level,
)
from .errors import (
    CapacityError,
    DimensionError,
    DomainError,
    FormatError,
    SizeError,
)
from .mmd import (
    Estimator,
    KernelConfig,
    KernelMatrix,
    MmdScore,
    build_kernel_matrix,
    median_heuristic,
    mmd2_biased,
    mmd2_for_labels,
    mmd2_unbiased,
)
from .permtest import (
    PermutationTestResult,
    PValueSummary,
    TestConfig,
    TestMode,
    cdf_pairs,
    derive_seed,
    ecdf,
    exact_permutation_pvalue,
    monte_carlo_pvalues,
    permutation_test,
    subset_provider,
    summarize_pvalues,
)
from .rbm import (
    FixedPointFormat,
    InferenceConfig,
    RbmModel,
    SigmoidKind,
    gibbs_generate,
    hidden_probs,
    load_model,
    quantize,
    quantize_unit,
    save_model,
    sigmoid_eval,
    sweep_fraction_split,
    train_cd1,
    visible_probs,
)
from .samples import (
    ImageShape,
    SampleSet,
    SplitSpec,
    binarize,
    load_idx,
    load_image_dir,
    load_raw,
    load_samples,
    split,
    write_image,
    write_raw,
)

__version__ = "0.1.0"
