import gzip
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ptmmd import ImageShape, SampleSet, load_idx

settings.register_profile(
    "ci",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
MNIST_GZ = os.path.join(REPO_ROOT, "data", "mnist_test_images.idx.gz")


@pytest.fixture(scope="session")
def mnist_idx_path(tmp_path_factory) -> str:
    """Path to the bundled MNIST test-image IDX file, decompressed once.

    The repository ships the images gzipped; an externally supplied file can
    be pointed to with PTMMD_MNIST_IDX instead.
    """
    override = os.environ.get("PTMMD_MNIST_IDX")
    if override:
        if not os.path.exists(override):
            pytest.skip(f"PTMMD_MNIST_IDX points to a missing file: {override}")
        return override
    if not os.path.exists(MNIST_GZ):
        pytest.skip("bundled MNIST fixture data/mnist_test_images.idx.gz is missing")
    out = tmp_path_factory.mktemp("mnist") / "mnist_test_images.idx"
    with gzip.open(MNIST_GZ, "rb") as f:
        out.write_bytes(f.read())
    return str(out)


@pytest.fixture(scope="session")
def mnist(mnist_idx_path) -> SampleSet:
    return load_idx(mnist_idx_path)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


def flat_shape(dim: int) -> ImageShape:
    return ImageShape(1, dim, 1)


def vectors(data) -> SampleSet:
    arr = np.atleast_2d(np.asarray(data, dtype=np.float64))
    return SampleSet(arr, flat_shape(arr.shape[1]))
