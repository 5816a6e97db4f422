import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ptmmd import (
    DimensionError,
    ImageShape,
    euclidean_distance,
    haar_distance,
    haar_feature,
    haar_feature_length,
    haar_level,
)
from ptmmd.distances import haar_feature_matrix


def oracle_haar_feature(row, shape):
    """Element-by-element reference: explicit per-block loops, no vectorization."""

    def level(img):
        h2, w2 = img.shape[0] // 2, img.shape[1] // 2
        avg = np.zeros((h2, w2))
        hor = np.zeros((h2, w2))
        ver = np.zeros((h2, w2))
        dia = np.zeros((h2, w2))
        for i in range(h2):
            for j in range(w2):
                a = img[2 * i, 2 * j]
                b = img[2 * i, 2 * j + 1]
                c = img[2 * i + 1, 2 * j]
                d = img[2 * i + 1, 2 * j + 1]
                avg[i, j] = (a + b + c + d) / 2
                hor[i, j] = (a + b - c - d) / 2
                ver[i, j] = (a - b + c - d) / 2
                dia[i, j] = (a - b - c + d) / 2
        return avg, hor, ver, dia

    pieces = []
    imgs = np.asarray(row, float).reshape(shape.height, shape.width, shape.channels)
    for ci in range(shape.channels):
        avg1, h1, v1, d1 = level(imgs[:, :, ci])
        pieces += [h1.ravel(), v1.ravel(), d1.ravel()]
        _, h2, v2, d2 = level(avg1)
        pieces += [h2.ravel(), v2.ravel(), d2.ravel()]
    return np.concatenate(pieces)


class TestEuclidean:
    def test_three_four_five(self):
        assert euclidean_distance([0, 0], [3, 4]) == 25.0

    def test_identity(self, rng):
        x = rng.normal(size=17)
        assert euclidean_distance(x, x) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            euclidean_distance([1, 2], [1, 2, 3])

    def test_binary_rows_count_disagreements(self, rng):
        x = (rng.random(784) > 0.5).astype(float)
        y = (rng.random(784) > 0.5).astype(float)
        disagreements = sum(1 for a, b in zip(x, y) if a != b)
        assert euclidean_distance(x, y) == disagreements

    @given(
        hnp.arrays(np.float64, 6, elements=st.floats(-10, 10)),
        hnp.arrays(np.float64, 6, elements=st.floats(-10, 10)),
    )
    def test_symmetry_and_nonnegativity(self, x, y):
        d = euclidean_distance(x, y)
        assert d >= 0.0
        assert d == euclidean_distance(y, x)

    def test_quadratic_scaling(self, rng):
        x, y = rng.normal(size=9), rng.normal(size=9)
        assert euclidean_distance(3 * x, 3 * y) == pytest.approx(
            9 * euclidean_distance(x, y), rel=1e-12
        )


class TestHaarLevel:
    def test_constant_block(self):
        lvl = haar_level([[1.0, 1.0], [1.0, 1.0]])
        assert lvl.average[0, 0] == 2.0
        assert lvl.horizontal[0, 0] == 0.0
        assert lvl.vertical[0, 0] == 0.0
        assert lvl.diagonal[0, 0] == 0.0

    def test_single_corner(self):
        lvl = haar_level([[1.0, 0.0], [0.0, 0.0]])
        assert (
            lvl.average[0, 0],
            lvl.horizontal[0, 0],
            lvl.vertical[0, 0],
            lvl.diagonal[0, 0],
        ) == (0.5, 0.5, 0.5, 0.5)

    def test_checkerboard_is_pure_diagonal(self):
        lvl = haar_level([[1.0, 0.0], [0.0, 1.0]])
        assert (
            lvl.average[0, 0],
            lvl.horizontal[0, 0],
            lvl.vertical[0, 0],
            lvl.diagonal[0, 0],
        ) == (1.0, 0.0, 0.0, 1.0)

    def test_odd_dimension_rejected(self):
        with pytest.raises(DimensionError):
            haar_level(np.zeros((3, 4)))

    def test_energy_conservation(self, rng):
        img = rng.normal(size=(28, 28))
        lvl = haar_level(img)
        before = float((img ** 2).sum())
        after = float(
            (lvl.average ** 2).sum()
            + (lvl.horizontal ** 2).sum()
            + (lvl.vertical ** 2).sum()
            + (lvl.diagonal ** 2).sum()
        )
        assert after == pytest.approx(before, rel=1e-12)


class TestHaarFeature:
    def test_length_28(self):
        assert haar_feature_length(ImageShape(28, 28, 1)) == 735
        assert haar_feature(np.zeros(784), ImageShape(28, 28, 1)).shape == (735,)

    def test_length_rgb(self):
        assert haar_feature_length(ImageShape(64, 64, 3)) == 11520

    def test_constant_image_is_zero(self):
        feat = haar_feature(np.full(784, 0.73), ImageShape(28, 28, 1))
        assert np.all(feat == 0.0)

    def test_matches_scalar_oracle(self, rng):
        shape = ImageShape(8, 12, 3)
        row = rng.normal(size=shape.pixels)
        assert np.allclose(
            haar_feature(row, shape), oracle_haar_feature(row, shape), atol=1e-12
        )

    def test_indivisible_rejected(self):
        with pytest.raises(DimensionError):
            haar_feature(np.zeros(36), ImageShape(6, 6, 1))

    def test_linearity(self, rng):
        shape = ImageShape(8, 8, 1)
        x, y = rng.normal(size=64), rng.normal(size=64)
        lhs = haar_feature(x + y, shape)
        rhs = haar_feature(x, shape) + haar_feature(y, shape)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_feature_energy_bounded_by_image_energy(self, rng):
        # both levels are orthonormal, so dropping averages only removes energy
        shape = ImageShape(64, 64, 3)
        row = rng.normal(size=shape.pixels)
        feat = haar_feature(row, shape)
        assert feat.shape == (11520,)
        assert float(feat @ feat) <= float(row @ row) + 1e-9

    def test_batch_matches_single(self, rng):
        shape = ImageShape(8, 8, 1)
        rows = rng.normal(size=(5, 64))
        batch = haar_feature_matrix(rows, shape)
        for i in range(5):
            assert np.array_equal(batch[i], haar_feature(rows[i], shape))


class TestHaarDistance:
    def test_zero_on_equal(self, rng):
        shape = ImageShape(4, 4, 1)
        x = rng.random(16)
        assert haar_distance(x, x, shape) == 0.0

    def test_blind_to_uniform_offset(self):
        # constant 1 vs constant 0: averages differ, details are all zero
        shape = ImageShape(4, 4, 1)
        assert haar_distance(np.ones(16), np.zeros(16), shape) == 0.0

    def test_matches_oracle_on_mnist(self, mnist):
        from ptmmd import binarize

        shape = mnist.shape
        rows = binarize(mnist, 0.5).data[:2]
        expected = euclidean_distance(
            oracle_haar_feature(rows[0], shape), oracle_haar_feature(rows[1], shape)
        )
        assert haar_distance(rows[0], rows[1], shape) == pytest.approx(
            expected, rel=1e-12
        )

    def test_quadratic_scaling(self, rng):
        shape = ImageShape(4, 8, 1)
        x, y = rng.normal(size=32), rng.normal(size=32)
        assert haar_distance(2 * x, 2 * y, shape) == pytest.approx(
            4 * haar_distance(x, y, shape), rel=1e-12
        )

    def test_symmetry(self, rng):
        shape = ImageShape(4, 4, 1)
        x, y = rng.random(16), rng.random(16)
        assert haar_distance(x, y, shape) == haar_distance(y, x, shape)
