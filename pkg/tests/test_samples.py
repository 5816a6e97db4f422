import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ptmmd import (
    CapacityError,
    DimensionError,
    DomainError,
    FormatError,
    ImageShape,
    SampleSet,
    SizeError,
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


def make_idx(dims, payload: bytes) -> bytes:
    return (
        struct.pack(">BBBB", 0, 0, 8, len(dims))
        + b"".join(struct.pack(">I", d) for d in dims)
        + payload
    )


class TestImageShape:
    def test_pixels(self):
        assert ImageShape(28, 28, 1).pixels == 784
        assert ImageShape(64, 64, 3).pixels == 12288

    def test_rejects_bad_channels(self):
        with pytest.raises(DimensionError):
            ImageShape(4, 4, 2)

    def test_rejects_nonpositive(self):
        with pytest.raises(DimensionError):
            ImageShape(0, 4, 1)

    def test_haar_divisibility(self):
        ImageShape(28, 28).require_haar()
        with pytest.raises(DimensionError):
            ImageShape(6, 8).require_haar()


class TestSampleSet:
    def test_rejects_row_length_mismatch(self):
        with pytest.raises(DimensionError):
            SampleSet(np.zeros((3, 5)), ImageShape(2, 2, 1))

    def test_rejects_empty(self):
        with pytest.raises(SizeError):
            SampleSet(np.zeros((0, 4)), ImageShape(2, 2, 1))

    def test_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            SampleSet(np.array([[0.0, np.nan, 0.0, 0.0]]), ImageShape(2, 2, 1))

    def test_data_is_read_only(self):
        s = SampleSet(np.zeros((2, 4)), ImageShape(2, 2, 1))
        with pytest.raises(ValueError):
            s.data[0, 0] = 1.0


class TestLoadIdx:
    def test_constant_payload(self, tmp_path):
        path = tmp_path / "a.idx"
        path.write_bytes(make_idx((2, 28, 28), b"\xff" * (2 * 784)))
        s = load_idx(path)
        assert s.data.shape == (2, 784)
        assert s.shape == ImageShape(28, 28, 1)
        assert np.all(s.data == 1.0)

    def test_scaling(self, tmp_path):
        path = tmp_path / "b.idx"
        path.write_bytes(make_idx((1, 2, 2), bytes([0, 51, 102, 255])))
        s = load_idx(path)
        assert np.allclose(s.data[0], [0.0, 0.2, 0.4, 1.0])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "c.idx"
        path.write_bytes(b"\x01\x00\x08\x03" + b"\x00" * 16)
        with pytest.raises(FormatError, match="byte 0"):
            load_idx(path)

    def test_bad_type_byte(self, tmp_path):
        path = tmp_path / "d.idx"
        path.write_bytes(b"\x00\x00\x0d\x03" + b"\x00" * 16)
        with pytest.raises(FormatError, match="byte 2"):
            load_idx(path)

    def test_truncated_payload_names_offset(self, tmp_path):
        path = tmp_path / "e.idx"
        path.write_bytes(make_idx((2, 2, 2), b"\x00" * 7))
        with pytest.raises(FormatError, match="byte 16"):
            load_idx(path)

    def test_oversized_dimension_rejected(self, tmp_path):
        path = tmp_path / "f.idx"
        path.write_bytes(make_idx((2**31, 28, 28), b"\x00" * 10))
        with pytest.raises(FormatError, match="does not match"):
            load_idx(path)

    def test_mnist_against_independent_reader(self, mnist, mnist_idx_path):
        # independent byte-level oracle: struct + manual arithmetic only
        blob = open(mnist_idx_path, "rb").read()
        count, h, w = struct.unpack(">III", blob[4:16])
        assert (count, h, w) == (10000, 28, 28)
        assert mnist.data.shape == (10000, 784)
        assert mnist.data.min() >= 0.0 and mnist.data.max() <= 1.0
        for row, col in [(0, 400), (137, 200), (9999, 405)]:
            byte = blob[16 + row * 784 + col]
            assert mnist.data[row, col] == byte / 255.0


class TestNetpbm:
    def test_black_pgm_dir(self, tmp_path):
        shape = ImageShape(4, 4, 1)
        for i in range(3):
            write_image(tmp_path / f"{i}.pgm", np.zeros(16), shape)
        s = load_image_dir(tmp_path, shape)
        assert s.data.shape == (3, 16)
        assert np.all(s.data == 0.0)

    def test_ppm_interleaving(self, tmp_path):
        shape = ImageShape(2, 2, 3)
        row = np.array([1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1], dtype=float)
        write_image(tmp_path / "x.ppm", row, shape)
        s = load_image_dir(tmp_path, shape)
        assert np.array_equal(s.data[0], row)

    def test_round_trip_bytes(self, tmp_path, rng):
        # loading then re-serializing reproduces the payload byte for byte
        shape = ImageShape(8, 8, 3)
        row = rng.integers(0, 256, shape.pixels).astype(float) / 255.0
        write_image(tmp_path / "a.ppm", row, shape)
        first = (tmp_path / "a.ppm").read_bytes()
        loaded = load_image_dir(tmp_path, shape)
        write_image(tmp_path / "b.ppm", loaded.data[0], shape)
        assert (tmp_path / "b.ppm").read_bytes() == first

    def test_filename_order(self, tmp_path):
        shape = ImageShape(1, 1, 1)
        write_image(tmp_path / "b.pgm", [1.0], shape)
        write_image(tmp_path / "a.pgm", [0.0], shape)
        s = load_image_dir(tmp_path, shape)
        assert list(s.data[:, 0]) == [0.0, 1.0]

    def test_shape_mismatch_names_file(self, tmp_path):
        write_image(tmp_path / "a.pgm", np.zeros(16), ImageShape(4, 4, 1))
        write_image(tmp_path / "b.pgm", np.zeros(4), ImageShape(2, 2, 1))
        with pytest.raises(DimensionError, match="b.pgm"):
            load_image_dir(tmp_path, ImageShape(4, 4, 1))

    def test_rejects_other_format(self, tmp_path):
        (tmp_path / "x.pgm").write_bytes(b"P3\n1 1\n255\n0\n")
        with pytest.raises(FormatError, match="magic"):
            load_image_dir(tmp_path, ImageShape(1, 1, 1))

    def test_load_directory_of_generated_rgb(self, tmp_path, rng):
        shape = ImageShape(64, 64, 3)
        for i in range(100):
            write_image(tmp_path / f"{i:03d}.ppm", rng.random(shape.pixels), shape)
        s = load_image_dir(tmp_path, shape)
        assert s.data.shape == (100, 12288)


class TestRawTensor:
    def test_round_trip(self, tmp_path, rng):
        data = rng.normal(size=(7, 5)).astype(np.float32)
        write_raw(tmp_path / "t.raw", data)
        s = load_raw(tmp_path / "t.raw")
        assert s.shape == ImageShape(1, 5, 1)
        assert np.array_equal(s.data, data.astype(np.float64))

    def test_magic_enforced(self, tmp_path):
        (tmp_path / "t.raw").write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(FormatError, match="byte 0"):
            load_raw(tmp_path / "t.raw")

    def test_payload_length_enforced(self, tmp_path):
        blob = b"PTMMDRAW" + struct.pack("<QQ", 2, 3) + b"\x00" * 10
        (tmp_path / "t.raw").write_bytes(blob)
        with pytest.raises(FormatError, match="byte 24"):
            load_raw(tmp_path / "t.raw")

    def test_dispatch(self, tmp_path, rng):
        write_raw(tmp_path / "t.raw", rng.random((3, 4)).astype(np.float32))
        assert load_samples(tmp_path / "t.raw").data.shape == (3, 4)
        (tmp_path / "i.idx").write_bytes(make_idx((1, 2, 2), bytes(4)))
        assert load_samples(tmp_path / "i.idx").shape == ImageShape(2, 2, 1)
        shape = ImageShape(2, 2, 1)
        write_image(tmp_path / "imgs.pgm", np.zeros(4), shape)
        with pytest.raises(FormatError):
            load_samples(tmp_path / "imgs.pgm")  # a lone pgm is not a container

    def test_dir_dispatch_infers_shape(self, tmp_path):
        d = tmp_path / "imgs"
        d.mkdir()
        write_image(d / "a.pgm", np.zeros(16), ImageShape(4, 4, 1))
        s = load_samples(d)
        assert s.shape == ImageShape(4, 4, 1)


class TestBinarize:
    def test_strict_threshold(self):
        s = SampleSet(np.array([[0.2, 0.5, 0.6]]), ImageShape(1, 3, 1))
        out = binarize(s, 0.5)
        assert list(out.data[0]) == [0.0, 0.0, 1.0]

    def test_zero_row(self):
        s = SampleSet(np.zeros((1, 4)), ImageShape(1, 4, 1))
        assert np.all(binarize(s, 0.5).data == 0.0)

    def test_domain_enforced(self):
        s = SampleSet(np.array([[1.5, 0.0]]), ImageShape(1, 2, 1))
        with pytest.raises(DomainError):
            binarize(s, 0.5)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
    def test_idempotent(self, values):
        s = SampleSet(np.array([values]), ImageShape(1, len(values), 1))
        once = binarize(s, 0.5)
        twice = binarize(once, 0.5)
        assert np.array_equal(once.data, twice.data)

    def test_mnist_ink_fraction(self, mnist):
        frac = float(binarize(mnist, 0.5).data.mean())
        assert abs(frac - 0.13) <= 0.02


class TestSplit:
    def test_exhaustive_is_permutation(self, rng):
        s = SampleSet(rng.random((10, 3)), ImageShape(1, 3, 1))
        (part,) = split(s, SplitSpec(seed=5, sizes=(10,)))
        assert np.array_equal(
            np.sort(part.data, axis=0), np.sort(s.data, axis=0)
        )

    def test_deterministic(self, rng):
        s = SampleSet(rng.random((10, 3)), ImageShape(1, 3, 1))
        a = split(s, SplitSpec(seed=7, sizes=(3, 3)))
        b = split(s, SplitSpec(seed=7, sizes=(3, 3)))
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.data, pb.data)

    def test_disjoint_many(self, rng):
        # rows are unique tags, so row values identify indices
        s = SampleSet(np.arange(70000, dtype=float).reshape(-1, 1), ImageShape(1, 1, 1))
        parts = split(s, SplitSpec(seed=3, sizes=(1000,) * 10))
        seen = np.concatenate([p.data[:, 0] for p in parts])
        assert len(np.unique(seen)) == 10000

    def test_capacity(self, rng):
        s = SampleSet(rng.random((5, 2)), ImageShape(1, 2, 1))
        with pytest.raises(CapacityError):
            split(s, SplitSpec(seed=0, sizes=(3, 3)))

    def test_sizes_validation(self):
        with pytest.raises(SizeError):
            SplitSpec(seed=0, sizes=())
        with pytest.raises(SizeError):
            SplitSpec(seed=0, sizes=(0,))
