"""Integer-only inference for small dilated temporal convolutional networks.

A network is three blocks of three 1-D convolutions (two dilated, one with
stride 2), each block optionally followed by average pooling, then a head
that average-pools the time axis into a few bins and applies one affine
unit whose output is the heart rate in BPM.

Every weight and activation tensor carries per-tensor affine int8
parameters ``real = scale * (q - zero_point)``. Convolutions accumulate in
int32, add an int32 bias quantized at ``scale_w * scale_x`` and requantize
to int8 with round-half-away-from-zero and saturation. The accumulation is
carried out in float64 matrix products, which is exact for these magnitudes
(well under 2**53).

The float reference path (:func:`tcn_reference`) runs the same graph on
dequantized weights with unquantized activations.
"""

from __future__ import annotations

import base64
import json
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from chris.errors import ShapeMismatch, UncalibratedQuantization
from chris.predictors.at import clamp_hr
from chris.signal import WINDOW, SampleWindow, synth_window

FORMAT = "chris-tcn"
FORMAT_VERSION = 1
INT8_MIN, INT8_MAX = -128, 127


@dataclass(frozen=True)
class QParams:
    """Per-tensor affine quantization; ``scale=None`` means not calibrated yet."""

    scale: float | None = None
    zero_point: int = 0

    @property
    def calibrated(self) -> bool:
        return self.scale is not None


@dataclass(frozen=True)
class ConvLayer:
    c_in: int
    c_out: int
    kernel: int
    dilation: int = 1
    stride: int = 1
    padding: int = 0
    relu: bool = True
    weight_q: QParams = field(default_factory=QParams)
    out_q: QParams = field(default_factory=QParams)

    def __post_init__(self) -> None:
        if min(self.c_in, self.c_out, self.kernel, self.dilation) < 1:
            raise ShapeMismatch(f"invalid layer geometry: {self}")
        if self.stride not in (1, 2):
            raise ShapeMismatch(f"stride must be 1 or 2, got {self.stride}")
        if self.padding < 0:
            raise ShapeMismatch("padding must be non-negative")
        for q in (self.weight_q, self.out_q):
            if q.scale is not None and not q.scale > 0:
                raise ValueError(f"quantization scale must be positive, got {q.scale}")

    def out_len(self, length: int) -> int:
        span = self.dilation * (self.kernel - 1) + 1
        return (length + 2 * self.padding - span) // self.stride + 1

    @property
    def weight_shape(self) -> tuple[int, int, int]:
        return (self.c_out, self.c_in, self.kernel)


@dataclass(frozen=True)
class Block:
    layers: tuple[ConvLayer, ...]
    pool: int = 1


@dataclass(frozen=True)
class Head:
    channels: int
    bins: int = 1
    weight_q: QParams = field(default_factory=QParams)

    @property
    def n_inputs(self) -> int:
        return self.channels * self.bins


@dataclass(frozen=True)
class TcnSpec:
    """Architecture plus quantization parameters of one network."""

    name: str
    blocks: tuple[Block, ...]
    head: Head
    in_channels: int = 4
    input_len: int = WINDOW
    input_q: QParams = field(default_factory=QParams)

    def __post_init__(self) -> None:
        if len(self.blocks) != 3 or any(len(b.layers) != 3 for b in self.blocks):
            raise ShapeMismatch("a TCN has exactly 3 blocks of 3 convolutional layers")
        for i, block in enumerate(self.blocks):
            dilated = sum(layer.dilation > 1 for layer in block.layers)
            strided = sum(layer.stride == 2 for layer in block.layers)
            if dilated != 2 or strided != 1:
                raise ShapeMismatch(
                    f"block {i}: need two dilated layers and one stride-2 layer"
                )
            if block.pool < 1:
                raise ShapeMismatch(f"block {i}: pool factor must be >= 1")
        length, channels = self.input_len, self.in_channels
        for layer in self.layers:
            if layer.c_in != channels:
                raise ShapeMismatch(f"layer expects {layer.c_in} channels, gets {channels}")
            channels = layer.c_out
        for block in self.blocks:
            for layer in block.layers:
                length = layer.out_len(length)
                if length < 1:
                    raise ShapeMismatch("sequence length collapsed to zero")
            length //= block.pool
        if self.head.channels != channels:
            raise ShapeMismatch(f"head expects {self.head.channels} channels, gets {channels}")
        if length % self.head.bins:
            raise ShapeMismatch(f"head bins {self.head.bins} do not divide length {length}")
        if self.input_q.scale is not None and not self.input_q.scale > 0:
            raise ValueError("input scale must be positive")

    @property
    def layers(self) -> list[ConvLayer]:
        return [layer for block in self.blocks for layer in block.layers]

    def lengths(self) -> list[int]:
        """Output length of every conv layer, in order."""
        out, length = [], self.input_len
        for block in self.blocks:
            for layer in block.layers:
                length = layer.out_len(length)
                out.append(length)
            length //= block.pool
        return out

    @property
    def head_input_len(self) -> int:
        length = self.input_len
        for block in self.blocks:
            for layer in block.layers:
                length = layer.out_len(length)
            length //= block.pool
        return length

    @property
    def calibrated(self) -> bool:
        return (
            self.input_q.calibrated
            and self.head.weight_q.calibrated
            and all(l.weight_q.calibrated and l.out_q.calibrated for l in self.layers)
        )


@dataclass(frozen=True, eq=False)
class TcnWeights:
    """int8 weights and int32 biases, one pair per conv layer, plus the head."""

    conv: tuple[tuple[np.ndarray, np.ndarray], ...]
    head_weight: np.ndarray
    head_bias: np.ndarray

    def __post_init__(self) -> None:
        conv = []
        for w, b in self.conv:
            w = _as_int(w, np.int8)
            b = _as_int(b, np.int32)
            conv.append((w, b))
        object.__setattr__(self, "conv", tuple(conv))
        object.__setattr__(self, "head_weight", _as_int(self.head_weight, np.int8))
        object.__setattr__(self, "head_bias", _as_int(np.atleast_1d(self.head_bias), np.int32))

    def check(self, spec: TcnSpec) -> None:
        layers = spec.layers
        if len(self.conv) != len(layers):
            raise ShapeMismatch(f"{len(self.conv)} weight pairs for {len(layers)} layers")
        for i, (layer, (w, b)) in enumerate(zip(layers, self.conv)):
            if w.shape != layer.weight_shape or b.shape != (layer.c_out,):
                raise ShapeMismatch(
                    f"layer {i}: weight {w.shape}/bias {b.shape}, expected "
                    f"{layer.weight_shape}/({layer.c_out},)"
                )
        if self.head_weight.shape != (spec.head.n_inputs,) or self.head_bias.shape != (1,):
            raise ShapeMismatch("head weight/bias shape mismatch")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TcnWeights):
            return NotImplemented
        return (
            len(self.conv) == len(other.conv)
            and all(
                np.array_equal(w1, w2) and np.array_equal(b1, b2)
                for (w1, b1), (w2, b2) in zip(self.conv, other.conv)
            )
            and np.array_equal(self.head_weight, other.head_weight)
            and np.array_equal(self.head_bias, other.head_bias)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass
class FloatWeights:
    """Real-valued weights, used for calibration and as the training format."""

    conv: list[tuple[np.ndarray, np.ndarray]]
    head_weight: np.ndarray
    head_bias: float


def _as_int(a: Any, dtype: type) -> np.ndarray:
    arr = np.asarray(a)
    info = np.iinfo(dtype)
    if arr.size and (arr.min() < info.min or arr.max() > info.max):
        raise ValueError(f"values outside {np.dtype(dtype).name} range")
    out = arr.astype(dtype)
    out.setflags(write=False)
    return out


# -- quantization primitives -------------------------------------------------


def round_half_away(x: np.ndarray | float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(x: np.ndarray, q: QParams, dtype: type = np.int8) -> np.ndarray:
    if q.scale is None:
        raise UncalibratedQuantization("tensor has no scale")
    info = np.iinfo(dtype)
    v = round_half_away(np.asarray(x, dtype=np.float64) / q.scale) + q.zero_point
    return np.clip(v, info.min, info.max).astype(dtype)


def dequantize(x: np.ndarray, q: QParams) -> np.ndarray:
    if q.scale is None:
        raise UncalibratedQuantization("tensor has no scale")
    return q.scale * (np.asarray(x, dtype=np.float64) - q.zero_point)


def _im2col(x: np.ndarray, layer: ConvLayer, out_len: int) -> np.ndarray:
    """(C_in, L) centred input -> (C_in * k, L') column matrix, zero padded."""
    xp = np.pad(x, ((0, 0), (layer.padding, layer.padding)))
    stop = layer.stride * (out_len - 1) + 1
    taps = [xp[:, j * layer.dilation : j * layer.dilation + stop : layer.stride]
            for j in range(layer.kernel)]
    return np.stack(taps, axis=1).reshape(layer.c_in * layer.kernel, out_len)


def _check_conv_shapes(x: np.ndarray, layer: ConvLayer, weight: np.ndarray,
                       bias: np.ndarray) -> int:
    if x.ndim != 2 or x.shape[0] != layer.c_in:
        raise ShapeMismatch(f"input shape {x.shape} does not match c_in={layer.c_in}")
    if weight.shape != layer.weight_shape:
        raise ShapeMismatch(f"weight shape {weight.shape}, expected {layer.weight_shape}")
    if np.shape(bias) != (layer.c_out,):
        raise ShapeMismatch(f"bias shape {np.shape(bias)}, expected ({layer.c_out},)")
    out_len = layer.out_len(x.shape[1])
    if out_len < 1:
        raise ShapeMismatch(f"input length {x.shape[1]} too short for layer")
    return out_len


def conv1d_accumulate(x: np.ndarray, layer: ConvLayer, weight: np.ndarray,
                      bias: np.ndarray, in_q: QParams) -> np.ndarray:
    """int32 accumulator of the dilated cross-correlation plus bias (no requantization)."""
    out_len = _check_conv_shapes(x, layer, weight, bias)
    xc = np.asarray(x, dtype=np.float64) - in_q.zero_point
    wc = np.asarray(weight, dtype=np.float64) - layer.weight_q.zero_point
    cols = _im2col(xc, layer, out_len)
    acc = wc.reshape(layer.c_out, -1) @ cols + np.asarray(bias, dtype=np.float64)[:, None]
    return np.rint(acc).astype(np.int64)


def conv1d(x: np.ndarray, layer: ConvLayer, weight: np.ndarray, bias: np.ndarray,
           in_q: QParams) -> np.ndarray:
    """Quantized conv layer: int8 (C_in, L) -> int8 (C_out, L')."""
    for q in (in_q, layer.weight_q, layer.out_q):
        if q.scale is None:
            raise UncalibratedQuantization("conv layer has an uncalibrated tensor")
    acc = conv1d_accumulate(x, layer, weight, bias, in_q)
    multiplier = in_q.scale * layer.weight_q.scale / layer.out_q.scale
    y = round_half_away(acc * multiplier) + layer.out_q.zero_point
    low = layer.out_q.zero_point if layer.relu else INT8_MIN
    return np.clip(y, max(low, INT8_MIN), INT8_MAX).astype(np.int8)


def conv1d_float(x: np.ndarray, layer: ConvLayer, weight: np.ndarray,
                 bias: np.ndarray) -> np.ndarray:
    out_len = _check_conv_shapes(x, layer, weight, bias)
    cols = _im2col(np.asarray(x, dtype=np.float64), layer, out_len)
    y = np.asarray(weight, dtype=np.float64).reshape(layer.c_out, -1) @ cols
    y += np.asarray(bias, dtype=np.float64)[:, None]
    return np.maximum(y, 0.0) if layer.relu else y


def avg_pool_int(x: np.ndarray, factor: int, q: QParams) -> np.ndarray:
    """Average-pool the time axis of an int8 tensor, keeping its quantization."""
    if factor == 1:
        return x
    c, length = x.shape
    n = length // factor
    s = (np.asarray(x[:, : n * factor], dtype=np.int64) - q.zero_point)
    s = s.reshape(c, n, factor).sum(axis=2)
    y = round_half_away(s / factor) + q.zero_point
    return np.clip(y, INT8_MIN, INT8_MAX).astype(np.int8)


def avg_pool_float(x: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return x
    c, length = x.shape
    n = length // factor
    return x[:, : n * factor].reshape(c, n, factor).mean(axis=2)


# -- whole-network inference -------------------------------------------------


def normalize_input(window: SampleWindow) -> np.ndarray:
    """Stack PPG and the 3 accel axes and z-score each channel."""
    x = np.vstack([window.ppg[None, :], window.accel])
    x = x - x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, keepdims=True)
    return np.divide(x, std, out=np.zeros_like(x), where=std > 1e-12)


def tcn_infer(spec: TcnSpec, weights: TcnWeights, window: SampleWindow) -> float:
    """Run the int8 network on one window and return the clamped BPM estimate."""
    if not spec.calibrated:
        raise UncalibratedQuantization(f"{spec.name}: some tensor has no scale")
    weights.check(spec)
    x = quantize(normalize_input(window), spec.input_q)
    in_q = spec.input_q
    pairs = iter(weights.conv)
    for block in spec.blocks:
        for layer in block.layers:
            w, b = next(pairs)
            x = conv1d(x, layer, w, b, in_q)
            in_q = layer.out_q
        x = avg_pool_int(x, block.pool, in_q)
    x = avg_pool_int(x, x.shape[1] // spec.head.bins, in_q)
    pooled = np.asarray(x, dtype=np.float64).reshape(-1) - in_q.zero_point
    hw = np.asarray(weights.head_weight, dtype=np.float64) - spec.head.weight_q.zero_point
    acc = int(np.rint(hw @ pooled)) + int(weights.head_bias[0])
    return clamp_hr(acc * spec.head.weight_q.scale * in_q.scale)


def forward_float(spec: TcnSpec, weights: FloatWeights, x: np.ndarray,
                  trace: list[np.ndarray] | None = None) -> float:
    """Float forward pass on a normalized (4, L) input; returns the raw head output.

    If ``trace`` is given, every conv output (post-activation) is appended to it.
    """
    pairs = iter(weights.conv)
    for block in spec.blocks:
        for layer in block.layers:
            w, b = next(pairs)
            x = conv1d_float(x, layer, w, b)
            if trace is not None:
                trace.append(x)
        x = avg_pool_float(x, block.pool)
    x = avg_pool_float(x, x.shape[1] // spec.head.bins)
    return float(np.asarray(weights.head_weight) @ x.reshape(-1) + weights.head_bias)


def dequantize_weights(spec: TcnSpec, weights: TcnWeights) -> FloatWeights:
    if not spec.calibrated:
        raise UncalibratedQuantization(f"{spec.name}: some tensor has no scale")
    weights.check(spec)
    conv = []
    in_q = spec.input_q
    for layer, (w, b) in zip(spec.layers, weights.conv):
        conv.append((dequantize(w, layer.weight_q),
                     np.asarray(b, dtype=np.float64) * layer.weight_q.scale * in_q.scale))
        in_q = layer.out_q
    head_scale = spec.head.weight_q.scale * in_q.scale
    return FloatWeights(
        conv=conv,
        head_weight=dequantize(weights.head_weight, spec.head.weight_q),
        head_bias=float(weights.head_bias[0]) * head_scale,
    )


def tcn_reference(spec: TcnSpec, weights: TcnWeights, window: SampleWindow) -> float:
    """Float oracle: same graph on dequantized weights, activations left in float."""
    fw = dequantize_weights(spec, weights)
    return clamp_hr(forward_float(spec, fw, normalize_input(window)))


# -- calibration and weight generation ---------------------------------------


def _symmetric(max_abs: float) -> QParams:
    return QParams(scale=max(float(max_abs), 1e-8) / INT8_MAX, zero_point=0)


def _unsigned(max_val: float) -> QParams:
    # [0, max] mapped onto the full int8 range.
    return QParams(scale=max(float(max_val), 1e-8) / 255.0, zero_point=INT8_MIN)


def quantize_model(spec: TcnSpec, weights: FloatWeights,
                   calibration: Sequence[SampleWindow],
                   headroom: float = 1.25) -> tuple[TcnSpec, TcnWeights]:
    """Post-training quantization: fit activation ranges on ``calibration`` windows.

    Weights get symmetric per-tensor scales; ReLU outputs use ``[0, max]``
    ranges, other activations symmetric ones. Observed activation maxima are
    widened by ``headroom`` so unseen inputs rarely saturate.
    """
    if not calibration:
        raise ValueError("calibration needs at least one window")
    inputs = [normalize_input(w) for w in calibration]
    in_max = max(float(np.abs(x).max()) for x in inputs)
    n_layers = len(spec.layers)
    act_max = np.zeros(n_layers)
    for x in inputs:
        acts: list[np.ndarray] = []
        forward_float(spec, weights, x, acts)
        for i, a in enumerate(acts):
            act_max[i] = max(act_max[i], float(np.abs(a).max()))

    act_max *= headroom
    input_q = _symmetric(in_max * headroom)
    in_q = input_q
    new_blocks, conv = [], []
    pairs = iter(weights.conv)
    i = 0
    for block in spec.blocks:
        layers = []
        for layer in block.layers:
            w, b = next(pairs)
            w_q = _symmetric(np.abs(w).max())
            out_q = _unsigned(act_max[i]) if layer.relu else _symmetric(act_max[i])
            qlayer = replace(layer, weight_q=w_q, out_q=out_q)
            bias_q = round_half_away(np.asarray(b) / (w_q.scale * in_q.scale))
            conv.append((quantize(w, w_q), np.clip(bias_q, -2**31, 2**31 - 1).astype(np.int32)))
            layers.append(qlayer)
            in_q = out_q
            i += 1
        new_blocks.append(replace(block, layers=tuple(layers)))
    head_q = _symmetric(np.abs(weights.head_weight).max())
    head = replace(spec.head, weight_q=head_q)
    head_bias = round_half_away(weights.head_bias / (head_q.scale * in_q.scale))
    qspec = replace(spec, blocks=tuple(new_blocks), head=head, input_q=input_q)
    qweights = TcnWeights(
        conv=tuple(conv),
        head_weight=quantize(weights.head_weight, head_q),
        head_bias=np.array([head_bias], dtype=np.int64).clip(-2**31, 2**31 - 1),
    )
    return qspec, qweights


def calibration_windows(seed: int, n: int = 32) -> list[SampleWindow]:
    """Synthetic windows spanning all activities and 50-180 BPM."""
    rng = np.random.default_rng(seed)
    return [
        synth_window(float(rng.uniform(50.0, 180.0)), i % 9 + 1, int(rng.integers(2**31)))
        for i in range(n)
    ]


def random_float_weights(spec: TcnSpec, seed: int) -> FloatWeights:
    """He-initialised conv weights and a unit-variance head (before scaling)."""
    rng = np.random.default_rng(seed)
    conv = []
    for layer in spec.layers:
        fan_in = layer.c_in * layer.kernel
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=layer.weight_shape)
        b = rng.normal(0.0, 0.05, size=layer.c_out)
        conv.append((w, b))
    head = rng.normal(0.0, 1.0 / np.sqrt(spec.head.n_inputs), size=spec.head.n_inputs)
    return FloatWeights(conv=conv, head_weight=head, head_bias=0.0)


def pooled_features(spec: TcnSpec, weights: FloatWeights, x: np.ndarray) -> np.ndarray:
    """Flattened head input (after the head's pooling) of the float network."""
    pairs = iter(weights.conv)
    for block in spec.blocks:
        for layer in block.layers:
            w, b = next(pairs)
            x = conv1d_float(x, layer, w, b)
        x = avg_pool_float(x, block.pool)
    return avg_pool_float(x, x.shape[1] // spec.head.bins).reshape(-1)


def random_model(spec: TcnSpec, seed: int, *, center_bpm: float = 100.0,
                 spread_bpm: float = 30.0,
                 calibration: Sequence[SampleWindow] | None = None,
                 ) -> tuple[TcnSpec, TcnWeights]:
    """Seeded random network whose outputs stay within ``center ± spread`` BPM.

    The head is rescaled so that ``sum(|w_i| * max|feature_i|)`` over the
    calibration windows equals ``spread_bpm``; the head bias is ``center_bpm``.
    """
    fw = random_float_weights(spec, seed)
    if calibration is None:
        calibration = calibration_windows(seed)
    feats = np.array([pooled_features(spec, fw, normalize_input(w)) for w in calibration])
    bound = float(np.abs(fw.head_weight) @ np.abs(feats).max(axis=0))
    if bound > 0:
        fw.head_weight = fw.head_weight * (spread_bpm / bound)
    fw.head_bias = center_bpm
    return quantize_model(spec, fw, calibration)


# -- operation counts ----------------------------------------------------------


class OpCount(NamedTuple):
    params: int
    macs: int

    def __add__(self, other: object) -> OpCount:  # type: ignore[override]
        if not isinstance(other, OpCount):
            return NotImplemented
        return OpCount(self.params + other.params, self.macs + other.macs)


def conv_ops(layer: ConvLayer, length_in: int) -> OpCount:
    """Weights + biases and multiply-accumulates of one conv layer."""
    length_out = layer.out_len(length_in)
    params = layer.c_out * layer.c_in * layer.kernel + layer.c_out
    return OpCount(params, layer.c_out * length_out * layer.c_in * layer.kernel)


def count_ops(spec: TcnSpec) -> OpCount:
    total = OpCount(0, 0)
    length = spec.input_len
    for block in spec.blocks:
        for layer in block.layers:
            total = total + conv_ops(layer, length)
            length = layer.out_len(length)
        length //= block.pool
    n = spec.head.n_inputs
    return total + OpCount(n + 1, n)


# -- architecture helpers -----------------------------------------------------


def build_spec(name: str, widths: Sequence[tuple[int, int]], kernels: Sequence[int],
               pools: Sequence[int], head_bins: int,
               dilations: Sequence[int] = (2, 4, 8), in_channels: int = 4) -> TcnSpec:
    """Assemble a 3-block network.

    Block ``i`` is ``conv(k_i, d_i) -> conv(k_i, d_i) -> conv(k_i, stride 2)``
    with widths ``(mid_i, mid_i, out_i)`` and "same" padding, then average
    pooling by ``pools[i]``.
    """
    blocks, c = [], in_channels
    for (mid, out), k, pool, d in zip(widths, kernels, pools, dilations):
        if k % 2 == 0:
            raise ShapeMismatch("kernel sizes must be odd for 'same' padding")
        layers = (
            ConvLayer(c, mid, k, dilation=d, padding=d * (k - 1) // 2),
            ConvLayer(mid, mid, k, dilation=d, padding=d * (k - 1) // 2),
            ConvLayer(mid, out, k, stride=2, padding=(k - 1) // 2),
        )
        blocks.append(Block(layers=layers, pool=pool))
        c = out
    return TcnSpec(name=name, blocks=tuple(blocks), head=Head(channels=c, bins=head_bins),
                   in_channels=in_channels)


# -- serialization ------------------------------------------------------------


def _encode(arr: np.ndarray, dtype: str) -> dict[str, Any]:
    a = np.ascontiguousarray(arr, dtype=np.dtype(dtype))
    return {"dtype": dtype, "shape": list(a.shape),
            "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(obj: dict[str, Any]) -> np.ndarray:
    if obj["dtype"] not in ("<i1", "<i4"):
        raise ValueError(f"unsupported array dtype {obj['dtype']!r}")
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype=np.dtype(obj["dtype"])).reshape(obj["shape"]).copy()


def _q_from(d: dict[str, Any] | None) -> QParams:
    return QParams(**d) if d else QParams()


def spec_to_dict(spec: TcnSpec) -> dict[str, Any]:
    return asdict(spec)


def spec_from_dict(d: dict[str, Any]) -> TcnSpec:
    blocks = []
    for b in d["blocks"]:
        layers = []
        for layer in b["layers"]:
            layer = dict(layer)
            layer["weight_q"] = _q_from(layer.get("weight_q"))
            layer["out_q"] = _q_from(layer.get("out_q"))
            layers.append(ConvLayer(**layer))
        blocks.append(Block(layers=tuple(layers), pool=b.get("pool", 1)))
    head = dict(d["head"])
    head["weight_q"] = _q_from(head.get("weight_q"))
    return TcnSpec(
        name=d["name"], blocks=tuple(blocks), head=Head(**head),
        in_channels=d.get("in_channels", 4), input_len=d.get("input_len", WINDOW),
        input_q=_q_from(d.get("input_q")),
    )


def model_to_dict(spec: TcnSpec, weights: TcnWeights | None = None) -> dict[str, Any]:
    """Versioned container; arrays are base64 little-endian int8 (weights) / int32 (biases)."""
    out: dict[str, Any] = {"format": FORMAT, "version": FORMAT_VERSION,
                           "spec": spec_to_dict(spec), "weights": None}
    if weights is not None:
        weights.check(spec)
        out["weights"] = {
            "conv": [{"weight": _encode(w, "<i1"), "bias": _encode(b, "<i4")}
                     for w, b in weights.conv],
            "head_weight": _encode(weights.head_weight, "<i1"),
            "head_bias": _encode(weights.head_bias, "<i4"),
        }
    return out


def model_from_dict(d: dict[str, Any]) -> tuple[TcnSpec, TcnWeights | None]:
    if d.get("format") != FORMAT:
        raise ValueError(f"not a {FORMAT} document")
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported {FORMAT} version {d.get('version')!r}")
    spec = spec_from_dict(d["spec"])
    wd = d.get("weights")
    if wd is None:
        return spec, None
    weights = TcnWeights(
        conv=tuple((_decode(c["weight"]), _decode(c["bias"])) for c in wd["conv"]),
        head_weight=_decode(wd["head_weight"]),
        head_bias=_decode(wd["head_bias"]),
    )
    weights.check(spec)
    return spec, weights


def save_model(path: str | Path, spec: TcnSpec, weights: TcnWeights | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(spec, weights), indent=1) + "\n",
                          encoding="utf-8")


def load_model(path: str | Path) -> tuple[TcnSpec, TcnWeights | None]:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def infer_many(spec: TcnSpec, weights: TcnWeights, windows: Iterable[SampleWindow]) -> np.ndarray:
    return np.array([tcn_infer(spec, weights, w) for w in windows])
