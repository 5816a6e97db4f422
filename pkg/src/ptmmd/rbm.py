"""Binary restricted Boltzmann machine with simulated fixed-point inference.

Training (one-step contrastive divergence) always runs in full precision;
quantization applies to inference only and models a hardware datapath with a
wide accumulator:

1. weights and biases are rounded to the signed n.m grid,
2. pre-activations are accumulated in full precision and then rounded,
3. the sigmoid output is rounded on the unsigned probability grid of step
   2^-(m+1) in [0, 1] (the sign-bit position of the n.m register is
   repurposed as one extra fraction bit, probabilities being nonnegative).

Hardware sigmoid approximations (positive half; every kind is extended by
f(x) = 1 - f(-x) and satisfies f(0) = 1/2, monotone, range [0, 1]):

* ramp:  min(0.25 x + 0.5, 1)
* plan:  min(0.25 x + 0.5, 0.125 x + 0.625, 0.03125 x + 0.84375, 1)
         (the lower envelope of the published segment lines, which keeps the
         curve monotone through every breakpoint; saturates at x = 5)
* as:    shift-only scheme 1 - 2^(-ceil(x) - 1) * (1 + (ceil(x) - x) / 2)
         for x > 0; its coarse power-of-two steps make it the crudest of the
         three, with worst-case error 0.125 next to 0.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DimensionError, DomainError, FormatError, SizeError
from .mmd import KernelConfig, build_kernel_matrix, median_heuristic, mmd2_biased
from .samples import ImageShape, SampleSet

MODEL_MAGIC = b"PTMMDRBM"
MODEL_VERSION = 1


@dataclass(frozen=True)
class FixedPointFormat:
    """Signed fixed point with ``int_bits`` integer and ``frac_bits`` fraction bits.

    One sign bit on top, so the total width is int_bits + frac_bits + 1; the
    representable range is [-2^n, 2^n - 2^-m] at resolution 2^-m.
    """

    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits < 0 or self.frac_bits < 0:
            raise DomainError(
                f"bit counts must be nonnegative, got {self.int_bits}.{self.frac_bits}"
            )

    @property
    def total_bits(self) -> int:
        return self.int_bits + self.frac_bits + 1

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def min_value(self) -> float:
        return -(2.0 ** self.int_bits)

    @property
    def max_value(self) -> float:
        return 2.0 ** self.int_bits - self.resolution


def quantize(value, fmt: FixedPointFormat):
    """Clamp to the representable range, then round to the nearest multiple of
    2^-m with ties away from zero. Idempotent and monotone."""
    arr = np.asarray(value, dtype=np.float64)
    clamped = np.clip(arr, fmt.min_value, fmt.max_value)
    scaled = clamped / fmt.resolution
    rounded = np.floor(np.abs(scaled) + 0.5) * np.sign(scaled) * fmt.resolution
    if np.isscalar(value) or np.ndim(value) == 0:
        return float(rounded)
    return rounded


def quantize_unit(value, frac_bits: int):
    """Round probabilities onto the unsigned grid of step 2^-(m+1) in [0, 1]."""
    step = 2.0 ** -(frac_bits + 1)
    arr = np.clip(np.asarray(value, dtype=np.float64), 0.0, 1.0)
    out = np.floor(arr / step + 0.5) * step
    if np.isscalar(value) or np.ndim(value) == 0:
        return float(out)
    return out


class SigmoidKind(str, Enum):
    TRUE = "true"
    PLAN = "plan"
    RAMP = "ramp"
    AS = "as"


def _sigmoid_positive(kind: SigmoidKind, a: np.ndarray) -> np.ndarray:
    """Each kind evaluated on a >= 0; the caller mirrors the negative half."""
    if kind == SigmoidKind.TRUE:
        return 1.0 / (1.0 + np.exp(-a))
    if kind == SigmoidKind.RAMP:
        return np.minimum(0.25 * a + 0.5, 1.0)
    if kind == SigmoidKind.PLAN:
        return np.minimum.reduce(
            [
                0.25 * a + 0.5,
                0.125 * a + 0.625,
                0.03125 * a + 0.84375,
                np.ones_like(a),
            ]
        )
    if kind == SigmoidKind.AS:
        # ceil(0) = 0 gives exactly 1 - 2^-1 = 0.5 at the origin
        ceil_a = np.ceil(a)
        scale = np.power(2.0, -ceil_a - 1.0)
        return 1.0 - scale * (1.0 + (ceil_a - a) / 2.0)
    raise DomainError(f"unknown sigmoid kind {kind!r}")


def sigmoid_eval(kind: SigmoidKind, x):
    """Evaluate the chosen sigmoid; negative arguments use f(x) = 1 - f(-x)."""
    arr = np.asarray(x, dtype=np.float64)
    pos = _sigmoid_positive(kind, np.abs(arr))
    out = np.where(arr < 0.0, 1.0 - pos, pos)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class RbmModel:
    """Full-precision weights (visible x hidden) and per-layer biases."""

    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        b = np.ascontiguousarray(self.visible_bias, dtype=np.float64)
        c = np.ascontiguousarray(self.hidden_bias, dtype=np.float64)
        if w.ndim != 2:
            raise DimensionError(f"weights must be 2-D, got {w.ndim}-D")
        if b.shape != (w.shape[0],) or c.shape != (w.shape[1],):
            raise DimensionError(
                f"bias shapes {b.shape}, {c.shape} do not match weights {w.shape}"
            )
        for arr in (w, b, c):
            if not np.isfinite(arr).all():
                raise DomainError("model parameters must be finite")
        for name, arr in (("weights", w), ("visible_bias", b), ("hidden_bias", c)):
            view = arr.view()
            view.flags.writeable = False
            object.__setattr__(self, name, view)

    @property
    def visible_units(self) -> int:
        return int(self.weights.shape[0])

    @property
    def hidden_units(self) -> int:
        return int(self.weights.shape[1])


@dataclass(frozen=True)
class InferenceConfig:
    sigmoid: SigmoidKind = SigmoidKind.TRUE
    fixed_format: FixedPointFormat | None = None
    gibbs_steps: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.gibbs_steps < 1:
            raise SizeError(f"gibbs_steps must be >= 1, got {self.gibbs_steps}")


def _quantized_params(model: RbmModel, fmt: FixedPointFormat | None):
    if fmt is None:
        return model.weights, model.visible_bias, model.hidden_bias
    return (
        quantize(model.weights, fmt),
        quantize(model.visible_bias, fmt),
        quantize(model.hidden_bias, fmt),
    )


def _unit_probs(pre: np.ndarray, icfg: InferenceConfig) -> np.ndarray:
    """Datapath from full-precision pre-activations to unit probabilities."""
    if icfg.fixed_format is not None:
        pre = quantize(pre, icfg.fixed_format)
    p = sigmoid_eval(icfg.sigmoid, pre)
    if icfg.fixed_format is not None:
        p = quantize_unit(p, icfg.fixed_format.frac_bits)
    return p


def _require_binary(arr: np.ndarray, what: str) -> None:
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise DomainError(f"{what} must be binary (all entries 0 or 1)")


def hidden_probs(model: RbmModel, v: np.ndarray, icfg: InferenceConfig) -> np.ndarray:
    """P(h_j = 1 | v) through the configured sigmoid and quantization pipeline."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.visible_units,):
        raise DimensionError(
            f"visible vector must have length {model.visible_units}, got {v.shape}"
        )
    _require_binary(v, "visible vector")
    w, _, c = _quantized_params(model, icfg.fixed_format)
    return _unit_probs(v @ w + c, icfg)


def visible_probs(model: RbmModel, h: np.ndarray, icfg: InferenceConfig) -> np.ndarray:
    """P(v_i = 1 | h); the mirror-image law through the same pipeline."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (model.hidden_units,):
        raise DimensionError(
            f"hidden vector must have length {model.hidden_units}, got {h.shape}"
        )
    _require_binary(h, "hidden vector")
    w, b, _ = _quantized_params(model, icfg.fixed_format)
    return _unit_probs(h @ w.T + b, icfg)


def _true_sigmoid(x: np.ndarray) -> np.ndarray:
    # numerically stable logistic for training
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def train_cd1(
    data: SampleSet,
    hidden: int,
    epochs: int = 30,
    learning_rate: float = 0.05,
    batch: int = 64,
    seed: int = 0,
    momentum: float = 0.9,
    weight_decay: float = 2e-4,
    sparsity_target: float | None = None,
    sparsity_cost: float = 0.3,
    on_epoch: Callable[[int, float], None] | None = None,
) -> RbmModel:
    """One-step contrastive divergence on binarized data, full precision.

    Standard trimmings: L2 weight decay, momentum (held at 0.5 for the first
    five epochs, then raised to ``momentum``), and an optional penalty pulling
    mean hidden activity toward ``sparsity_target``. Weights start as seeded
    N(0, 0.01^2) draws, biases at zero; zero epochs returns exactly that
    initialization. ``on_epoch`` receives the epoch index and the epoch's mean
    per-pixel reconstruction error |v - P(v=1|h)|.
    """
    if hidden < 1:
        raise SizeError(f"hidden unit count must be positive, got {hidden}")
    if epochs < 0 or batch < 1:
        raise SizeError(f"bad training schedule: epochs={epochs}, batch={batch}")
    x = data.data
    _require_binary(x, "training data")
    rows, visible = x.shape
    rng = np.random.Generator(np.random.PCG64(seed))
    w = rng.normal(0.0, 0.01, size=(visible, hidden))
    b = np.zeros(visible)
    c = np.zeros(hidden)
    vel_w = np.zeros_like(w)
    vel_b = np.zeros_like(b)
    vel_c = np.zeros_like(c)
    for epoch in range(epochs):
        mom = 0.5 if epoch < 5 else momentum
        order = rng.permutation(rows)
        abs_err = 0.0
        for start in range(0, rows, batch):
            v0 = x[order[start : start + batch]]
            k = v0.shape[0]
            ph0 = _true_sigmoid(v0 @ w + c)
            h0 = (rng.random(ph0.shape) < ph0).astype(np.float64)
            pv1 = _true_sigmoid(h0 @ w.T + b)
            v1 = (rng.random(pv1.shape) < pv1).astype(np.float64)
            ph1 = _true_sigmoid(v1 @ w + c)
            grad_w = (v0.T @ ph0 - v1.T @ ph1) / k - weight_decay * w
            grad_b = (v0 - v1).mean(axis=0)
            grad_c = (ph0 - ph1).mean(axis=0)
            if sparsity_target is not None:
                grad_c = grad_c - sparsity_cost * (ph0.mean(axis=0) - sparsity_target)
            vel_w = mom * vel_w + learning_rate * grad_w
            vel_b = mom * vel_b + learning_rate * grad_b
            vel_c = mom * vel_c + learning_rate * grad_c
            w += vel_w
            b += vel_b
            c += vel_c
            abs_err += float(np.abs(v0 - pv1).sum())
        if on_epoch is not None:
            on_epoch(epoch, abs_err / (rows * visible))
    return RbmModel(w, b, c)


def gibbs_generate(
    model: RbmModel,
    count: int,
    icfg: InferenceConfig,
    shape: ImageShape | None = None,
    label: str = "generated",
) -> SampleSet:
    """Sample ``count`` visible configurations from the model.

    Each chain starts at iid Bernoulli(1/2) and alternates hidden/visible
    block updates for ``gibbs_steps`` full sweeps through the configured
    sigmoid and quantization pipeline; the final binary visible states are
    returned. Deterministic given the seed.
    """
    if count < 1:
        raise SizeError(f"sample count must be positive, got {count}")
    w, b, c = _quantized_params(model, icfg.fixed_format)
    rng = np.random.Generator(np.random.PCG64(icfg.seed))
    v = (rng.random((count, model.visible_units)) < 0.5).astype(np.float64)
    for _ in range(icfg.gibbs_steps):
        ph = _unit_probs(v @ w + c, icfg)
        h = (rng.random(ph.shape) < ph).astype(np.float64)
        pv = _unit_probs(h @ w.T + b, icfg)
        v = (rng.random(pv.shape) < pv).astype(np.float64)
    if shape is None:
        shape = ImageShape(1, model.visible_units, 1)
    if shape.pixels != model.visible_units:
        raise DimensionError(
            f"shape implies {shape.pixels} pixels, model has {model.visible_units}"
        )
    return SampleSet(v, shape, label)


def fraction_splits(total_bitwidth: int) -> list[FixedPointFormat]:
    """All (n, m) with n + m + 1 = total_bitwidth, ordered by increasing m."""
    if total_bitwidth < 2:
        raise SizeError(f"total bitwidth must be >= 2, got {total_bitwidth}")
    return [
        FixedPointFormat(total_bitwidth - 1 - m, m) for m in range(total_bitwidth)
    ]


def sweep_fraction_split(
    model: RbmModel,
    total_bitwidth: int,
    reference: SampleSet,
    kcfg: KernelConfig,
    icfg: InferenceConfig,
    probe_size: int = 100,
) -> FixedPointFormat:
    """Pick the integer/fraction split minimizing biased MMD^2 to ``reference``.

    Every candidate probes with the same seed so the comparison isolates the
    format; with the bandwidth unset it is resolved once from the reference
    samples so all candidates are scored on a common scale. Ties go to the
    larger fraction-bit count.
    """
    if kcfg.sigma is None:
        kcfg = KernelConfig(
            distance=kcfg.distance,
            sigma=median_heuristic(reference, kcfg.distance),
            estimator=kcfg.estimator,
        )
    best_fmt = None
    best_score = math.inf
    for fmt in fraction_splits(total_bitwidth):
        probe_icfg = InferenceConfig(
            sigmoid=icfg.sigmoid,
            fixed_format=fmt,
            gibbs_steps=icfg.gibbs_steps,
            seed=icfg.seed,
        )
        probe = gibbs_generate(model, probe_size, probe_icfg, shape=reference.shape)
        score = mmd2_biased(build_kernel_matrix(probe, reference, kcfg)).value
        if score <= best_score:  # <= so equal scores keep the larger m
            best_fmt, best_score = fmt, score
    return best_fmt


def save_model(model: RbmModel, path: str | os.PathLike) -> None:
    """Persist as PTMMDRBM: magic, version byte, V and H as little-endian
    int64, then visible bias, hidden bias, and row-major weights as float64."""
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(bytes([MODEL_VERSION]))
        f.write(struct.pack("<qq", model.visible_units, model.hidden_units))
        f.write(model.visible_bias.astype("<f8").tobytes())
        f.write(model.hidden_bias.astype("<f8").tobytes())
        f.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())


def load_model(path: str | os.PathLike) -> RbmModel:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic at byte 0, expected {MODEL_MAGIC!r}")
    if len(blob) < 25:
        raise FormatError(f"{path}: truncated header at byte {len(blob)}")
    if blob[8] != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {blob[8]} at byte 8")
    v, h = struct.unpack("<qq", blob[9:25])
    if v < 1 or h < 1:
        raise FormatError(f"{path}: nonpositive layer sizes ({v}, {h}) at byte 9")
    expected = 25 + 8 * (v + h + v * h)
    if len(blob) != expected:
        raise FormatError(
            f"{path}: file is {len(blob)} bytes, sizes ({v}, {h}) require {expected}"
        )
    floats = np.frombuffer(blob[25:], dtype="<f8")
    return RbmModel(
        weights=floats[v + h :].reshape(v, h),
        visible_bias=floats[:v],
        hidden_bias=floats[v : v + h],
    )
