"""Loading, validation, and partitioning of flat sample sets.

Supported on-disk formats:

* IDX unsigned-byte image files (the classic MNIST container): magic
  ``0x00 0x00 0x08 0x03``, big-endian uint32 dimensions, raw pixels.
* Binary PGM (``P5``) and PPM (``P6``) with maxval 255, one image per file.
* ``PTMMDRAW`` tensors for arbitrary numeric data: 8-byte magic
  ``PTMMDRAW``, then rows and cols as little-endian uint64, then a
  row-major float32 payload.

Pixels are always scaled to [0, 1] by dividing by 255; RGB rows are laid
out pixel-major (r, g, b, r, g, b, ...).
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError, DomainError, FormatError, SizeError

IDX_UBYTE = 0x08
RAW_MAGIC = b"PTMMDRAW"


@dataclass(frozen=True)
class ImageShape:
    """Height x width x channels of one sample; channels is 1 or 3."""

    height: int
    width: int
    channels: int = 1

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise DimensionError(
                f"image dimensions must be positive, got {self.height}x{self.width}"
            )
        if self.channels not in (1, 3):
            raise DimensionError(f"channels must be 1 or 3, got {self.channels}")

    @property
    def pixels(self) -> int:
        return self.height * self.width * self.channels

    def require_haar(self) -> None:
        # two halving levels, so both spatial dimensions must divide by 4
        if self.height % 4 or self.width % 4:
            raise DimensionError(
                "Haar features need height and width divisible by 4, "
                f"got {self.height}x{self.width}"
            )


@dataclass(frozen=True)
class SampleSet:
    """A batch of flattened samples: one row per sample, ``shape.pixels`` columns.

    The data array is exposed through a read-only view, so a constructed set
    can be shared freely across threads.
    """

    data: np.ndarray
    shape: ImageShape
    label: str = ""

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise DimensionError(f"sample data must be 2-D, got {data.ndim}-D")
        if data.shape[0] < 1:
            raise SizeError("a sample set needs at least one row")
        if data.shape[1] != self.shape.pixels:
            raise DimensionError(
                f"rows have {data.shape[1]} entries but shape "
                f"{self.shape.height}x{self.shape.width}x{self.shape.channels} "
                f"implies {self.shape.pixels}"
            )
        if not np.isfinite(data).all():
            raise DomainError("sample values must all be finite")
        view = data.view()
        view.flags.writeable = False
        object.__setattr__(self, "data", view)

    def __len__(self) -> int:
        return int(self.data.shape[0])


@dataclass(frozen=True)
class SplitSpec:
    """Seeded request for disjoint row subsets of the given sizes."""

    seed: int
    sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if not self.sizes:
            raise SizeError("split sizes must be non-empty")
        if any(s < 1 for s in self.sizes):
            raise SizeError(f"split sizes must be positive, got {self.sizes}")


def load_idx(path: str | os.PathLike) -> SampleSet:
    """Parse an unsigned-byte IDX image file, scaling pixels to [0, 1]."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4:
        raise FormatError(
            f"{path}: truncated IDX header at byte {len(blob)} (need 4 magic bytes)"
        )
    if blob[0] != 0 or blob[1] != 0:
        raise FormatError(
            f"{path}: bad IDX magic at byte 0, expected 00 00, "
            f"got {blob[0]:02x} {blob[1]:02x}"
        )
    if blob[2] != IDX_UBYTE:
        raise FormatError(
            f"{path}: unsupported IDX type byte {blob[2]:#04x} at byte 2 "
            "(only 0x08 unsigned byte is supported)"
        )
    ndim = blob[3]
    if ndim != 3:
        raise FormatError(
            f"{path}: IDX dimension count at byte 3 is {ndim}; image files "
            "need 3 dimensions (count, height, width)"
        )
    header_end = 4 + 4 * ndim
    if len(blob) < header_end:
        raise FormatError(
            f"{path}: truncated IDX dimension table at byte {len(blob)} "
            f"(need {header_end})"
        )
    count, height, width = struct.unpack(">III", blob[4:header_end])
    if count < 1 or height < 1 or width < 1:
        raise FormatError(
            f"{path}: zero IDX dimension in ({count}, {height}, {width}) at byte 4"
        )
    expected = count * height * width
    payload = blob[header_end:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload of {len(payload)} bytes at byte {header_end} does "
            f"not match dimensions ({count}, {height}, {width}) = {expected} bytes"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return SampleSet(
        pixels.reshape(count, height * width),
        ImageShape(height, width, 1),
        label=os.path.basename(str(path)),
    )


def _parse_netpbm(path: str | os.PathLike) -> tuple[np.ndarray, ImageShape]:
    """Read one binary PGM/PPM file; returns (flat row in [0,1], shape)."""
    with open(path, "rb") as f:
        blob = f.read()
    magic = blob[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not binary PGM/PPM, magic is {magic!r}")
    channels = 1 if magic == b"P5" else 3

    # header: width, height, maxval as whitespace-separated ASCII tokens,
    # '#' starts a comment that runs to end of line
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        if pos >= len(blob):
            raise FormatError(f"{path}: truncated header at byte {pos}")
        ch = blob[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            nl = blob.find(b"\n", pos)
            if nl < 0:
                raise FormatError(f"{path}: unterminated comment at byte {pos}")
            pos = nl + 1
        elif ch.isdigit():
            end = pos
            while end < len(blob) and blob[end : end + 1].isdigit():
                end += 1
            tokens.append(int(blob[pos:end]))
            pos = end
        else:
            raise FormatError(f"{path}: unexpected header byte {ch!r} at byte {pos}")
    width, height, maxval = tokens
    if maxval != 255:
        raise FormatError(f"{path}: maxval must be 255, got {maxval}")
    # exactly one whitespace byte separates the header from the payload
    if pos >= len(blob) or not blob[pos : pos + 1].isspace():
        raise FormatError(f"{path}: missing payload separator at byte {pos}")
    pos += 1
    payload = blob[pos:]
    expected = width * height * channels
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload of {len(payload)} bytes at byte {pos} does not "
            f"match {width}x{height}x{channels} = {expected} bytes"
        )
    row = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return row, ImageShape(height, width, channels)


def _image_files(path: str | os.PathLike) -> list[str]:
    names = sorted(
        n
        for n in os.listdir(path)
        if not n.startswith(".") and os.path.isfile(os.path.join(path, n))
    )
    if not names:
        raise CapacityError(f"{path}: directory contains no sample files")
    return [os.path.join(path, n) for n in names]


def load_image_dir(path: str | os.PathLike, shape: ImageShape) -> SampleSet:
    """Load every PGM/PPM file in a directory, in lexicographic filename order."""
    rows = []
    for fname in _image_files(path):
        row, fshape = _parse_netpbm(fname)
        if fshape != shape:
            raise DimensionError(
                f"{fname}: image is {fshape.height}x{fshape.width}x"
                f"{fshape.channels}, expected {shape.height}x{shape.width}x"
                f"{shape.channels}"
            )
        rows.append(row)
    return SampleSet(np.vstack(rows), shape, label=os.path.basename(os.path.abspath(path)))


def write_image(path: str | os.PathLike, row: np.ndarray, shape: ImageShape) -> None:
    """Write one sample row (values in [0,1]) as binary PGM (1 channel) or PPM (3)."""
    row = np.asarray(row, dtype=np.float64).ravel()
    if row.size != shape.pixels:
        raise DimensionError(
            f"row has {row.size} entries, shape implies {shape.pixels}"
        )
    if row.min() < 0.0 or row.max() > 1.0:
        raise DomainError("pixel values must lie in [0, 1]")
    magic = b"P5" if shape.channels == 1 else b"P6"
    header = magic + f"\n{shape.width} {shape.height}\n255\n".encode("ascii")
    payload = np.round(row * 255.0).astype(np.uint8).tobytes()
    with open(path, "wb") as f:
        f.write(header + payload)


def load_raw(path: str | os.PathLike, shape: ImageShape | None = None) -> SampleSet:
    """Load a PTMMDRAW float32 tensor file.

    When no shape is given the rows are treated as flat vectors
    (height 1, width = cols, 1 channel).
    """
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != RAW_MAGIC:
        raise FormatError(f"{path}: bad magic at byte 0, expected {RAW_MAGIC!r}")
    if len(blob) < 24:
        raise FormatError(f"{path}: truncated header at byte {len(blob)} (need 24)")
    rows, cols = struct.unpack("<QQ", blob[8:24])
    expected = rows * cols * 4
    payload = blob[24:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload of {len(payload)} bytes at byte 24 does not match "
            f"{rows}x{cols} float32 = {expected} bytes"
        )
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(rows, cols)
    if shape is None:
        shape = ImageShape(1, int(cols), 1)
    return SampleSet(data, shape, label=os.path.basename(str(path)))


def write_raw(path: str | os.PathLike, data: np.ndarray) -> None:
    """Write a 2-D array as a PTMMDRAW float32 tensor file."""
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2:
        raise DimensionError(f"raw tensors must be 2-D, got {data.ndim}-D")
    with open(path, "wb") as f:
        f.write(RAW_MAGIC)
        f.write(struct.pack("<QQ", data.shape[0], data.shape[1]))
        f.write(data.tobytes())


def load_samples(path: str | os.PathLike, shape: ImageShape | None = None) -> SampleSet:
    """Load samples from a directory of PGM/PPM files, an IDX file, or a raw tensor.

    For directories the shape is inferred from the first file when not given.
    """
    if os.path.isdir(path):
        if shape is None:
            _, shape = _parse_netpbm(_image_files(path)[0])
        return load_image_dir(path, shape)
    with open(path, "rb") as f:
        head = f.read(8)
    if head[:8] == RAW_MAGIC:
        return load_raw(path, shape)
    if len(head) >= 4 and head[0] == 0 and head[1] == 0:
        out = load_idx(path)
        if shape is not None and shape != out.shape:
            out = reshape_samples(out, shape)
        return out
    raise FormatError(f"{path}: unrecognized sample container (magic {head[:8]!r})")


def reshape_samples(s: SampleSet, shape: ImageShape) -> SampleSet:
    """Reinterpret rows under a different shape with the same pixel count."""
    if shape.pixels != s.shape.pixels:
        raise DimensionError(
            f"cannot reinterpret rows of {s.shape.pixels} entries as "
            f"{shape.height}x{shape.width}x{shape.channels}"
        )
    return SampleSet(s.data, shape, s.label)


def binarize(s: SampleSet, threshold: float = 0.5) -> SampleSet:
    """Map entries strictly above the threshold to 1.0 and the rest to 0.0."""
    if not 0.0 < threshold < 1.0:
        raise DomainError(f"threshold must lie strictly in (0, 1), got {threshold}")
    lo = float(s.data.min())
    hi = float(s.data.max())
    if lo < 0.0 or hi > 1.0:
        raise DomainError(f"binarize needs entries in [0, 1], found range [{lo}, {hi}]")
    out = np.where(s.data > threshold, 1.0, 0.0)
    return SampleSet(out, s.shape, s.label)


def split(s: SampleSet, spec: SplitSpec) -> list[SampleSet]:
    """Partition rows into disjoint subsets via one seeded Fisher-Yates shuffle.

    The shuffle comes from a PCG64 stream, so the same seed and sizes give the
    same subsets on every platform.
    """
    needed = sum(spec.sizes)
    if needed > len(s):
        raise CapacityError(
            f"split sizes need {needed} rows but the set has {len(s)}"
        )
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    order = rng.permutation(len(s))
    parts = []
    start = 0
    for i, size in enumerate(spec.sizes):
        rows = order[start : start + size]
        parts.append(SampleSet(s.data[rows], s.shape, f"{s.label}/part{i}"))
        start += size
    return parts
