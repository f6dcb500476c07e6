"""Primitive NCHW tensor operations.

Every op is a pure function over immutable tensors. Reductions accumulate in
float32 with a pinned order (kernel row, kernel column, then input channel),
so outputs are bit-identical from run to run. set_num_threads() only changes
how output rows are split across workers; each output element's reduction is
computed by a single worker in the same order at any thread count.

Convolutions carry no bias unless their ConvSpec asks for one (the network
follows each unbiased conv with an affine norm). Padding is zero-fill; callers that
need edge-replicate padding pad first and call with padding 0.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError
from .tensor import Tensor

_num_threads = 1

# Row-chunked dispatch is pointless below this many output elements.
_PARALLEL_MIN_ELEMENTS = 1 << 14


def set_num_threads(n: int) -> None:
    """Set the worker count for row-parallel convolution. 1 means serial."""
    global _num_threads
    if not isinstance(n, int) or n < 1:
        raise ConfigurationError(f"thread count must be a positive integer, got {n!r}")
    _num_threads = n


def get_num_threads() -> int:
    return _num_threads


def _pair(v, name: str) -> tuple[int, int]:
    if isinstance(v, int):
        v = (v, v)
    v = tuple(int(x) for x in v)
    if len(v) != 2:
        raise ConfigurationError(f"{name} must be an int or a pair, got {v!r}")
    return v  # type: ignore[return-value]


@dataclass(frozen=True)
class ConvSpec:
    """Structural description of a 2-D convolution."""

    in_channels: int
    out_channels: int
    kernel: tuple[int, int]
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)
    groups: int = 1
    has_bias: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kernel", _pair(self.kernel, "kernel"))
        object.__setattr__(self, "stride", _pair(self.stride, "stride"))
        object.__setattr__(self, "padding", _pair(self.padding, "padding"))
        if self.in_channels < 1 or self.out_channels < 1:
            raise ConfigurationError("channel counts must be positive")
        if min(self.kernel) < 1 or min(self.stride) < 1:
            raise ConfigurationError("kernel and stride entries must be >= 1")
        if min(self.padding) < 0:
            raise ConfigurationError("padding entries must be >= 0")
        if self.groups < 1:
            raise ConfigurationError("groups must be >= 1")
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ConfigurationError(
                f"groups={self.groups} must divide in_channels={self.in_channels} "
                f"and out_channels={self.out_channels}"
            )

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (
            self.out_channels,
            self.in_channels // self.groups,
            self.kernel[0],
            self.kernel[1],
        )

    @property
    def weight_param_count(self) -> int:
        o, i, kh, kw = self.weight_shape
        return o * i * kh * kw

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        kh, kw = self.kernel
        sh, sw = self.stride
        ph, pw = self.padding
        oh = (h + 2 * ph - kh) // sh + 1
        ow = (w + 2 * pw - kw) // sw + 1
        if oh < 1 or ow < 1:
            raise ShapeError(
                f"conv output would be {oh}x{ow} for input {h}x{w} with {self}"
            )
        return oh, ow


@dataclass(frozen=True)
class AffineNorm:
    """Inference-time batch norm: per-channel affine with frozen statistics."""

    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    eps: float = 1e-5

    def __post_init__(self):
        for name in ("gamma", "beta", "mean", "var"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float32)
            if arr.ndim != 1:
                raise ConfigurationError(f"norm {name} must be a 1-D vector")
            object.__setattr__(self, name, arr)
        c = self.gamma.shape[0]
        if any(getattr(self, n).shape[0] != c for n in ("beta", "mean", "var")):
            raise ConfigurationError("norm parameter vectors must share one length")
        if self.eps < 0:
            raise ConfigurationError("norm eps must be >= 0")
        if np.any(self.var < 0):
            raise ConfigurationError("norm variance entries must be >= 0")
        if np.any(self.var + np.float32(self.eps) <= 0):
            raise ConfigurationError("norm requires var + eps > 0 per channel")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    @classmethod
    def identity(cls, channels: int, eps: float = 1e-5) -> "AffineNorm":
        return cls(
            gamma=np.ones(channels, np.float32),
            beta=np.zeros(channels, np.float32),
            mean=np.zeros(channels, np.float32),
            var=np.ones(channels, np.float32),
            eps=eps,
        )


def _chunk_bounds(total: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, total))
    step, extra = divmod(total, parts)
    bounds = []
    start = 0
    for i in range(parts):
        stop = start + step + (1 if i < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def _accumulate_conv(dst, xp, weight, sh, sw):
    """Standard conv on one group / one row chunk.

    dst: (n, cout_g, oh, ow) view, xp: padded input rows for this chunk.
    Accumulation order per output element: kernel row, kernel col, channel.
    """
    _, cin_g, kh, kw = weight.shape
    oh, ow = dst.shape[2], dst.shape[3]
    dst[...] = np.float32(0)
    tmp = np.empty(dst.shape, np.float32)
    for ikh in range(kh):
        rows = xp[:, :, ikh : ikh + (oh - 1) * sh + 1 : sh, :]
        for ikw in range(kw):
            xs = rows[:, :, :, ikw : ikw + (ow - 1) * sw + 1 : sw]
            for c in range(cin_g):
                np.multiply(
                    xs[:, c : c + 1],
                    weight[:, c, ikh, ikw].reshape(1, -1, 1, 1),
                    out=tmp,
                )
                dst += tmp


def _accumulate_depthwise(dst, xp, weight, sh, sw):
    """Depthwise conv (groups == in == out) on one row chunk."""
    kh, kw = weight.shape[2], weight.shape[3]
    oh, ow = dst.shape[2], dst.shape[3]
    dst[...] = np.float32(0)
    tmp = np.empty(dst.shape, np.float32)
    for ikh in range(kh):
        rows = xp[:, :, ikh : ikh + (oh - 1) * sh + 1 : sh, :]
        for ikw in range(kw):
            xs = rows[:, :, :, ikw : ikw + (ow - 1) * sw + 1 : sw]
            np.multiply(xs, weight[:, 0, ikh, ikw].reshape(1, -1, 1, 1), out=tmp)
            dst += tmp


def conv2d(x: Tensor, weight: np.ndarray, bias: np.ndarray | None, spec: ConvSpec) -> Tensor:
    """Exact direct convolution: sum of products over the receptive field, plus bias."""
    weight = np.ascontiguousarray(weight, dtype=np.float32)
    if x.c != spec.in_channels:
        raise ConfigurationError(
            f"input has {x.c} channels, spec expects {spec.in_channels}"
        )
    if weight.shape != spec.weight_shape:
        raise ConfigurationError(
            f"weight shape {weight.shape} does not match spec {spec.weight_shape}"
        )
    if spec.has_bias:
        if bias is None:
            raise ConfigurationError("spec declares a bias but none was given")
        bias = np.ascontiguousarray(bias, dtype=np.float32)
        if bias.shape != (spec.out_channels,):
            raise ConfigurationError(f"bias shape {bias.shape} != ({spec.out_channels},)")
    elif bias is not None:
        raise ConfigurationError("bias given for a bias-free spec")

    n = x.n
    kh, kw = spec.kernel
    sh, sw = spec.stride
    ph, pw = spec.padding
    oh, ow = spec.output_hw(x.h, x.w)

    xp = x.data
    if ph or pw:
        xp = np.pad(xp, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    out = np.empty((n, spec.out_channels, oh, ow), np.float32)

    depthwise = spec.groups == spec.in_channels == spec.out_channels
    groups = spec.groups
    cin_g = spec.in_channels // groups
    cout_g = spec.out_channels // groups

    def fill(r0: int, r1: int) -> None:
        sub = xp[:, :, r0 * sh : (r1 - 1) * sh + kh, :]
        if depthwise:
            _accumulate_depthwise(out[:, :, r0:r1], sub, weight, sh, sw)
        elif groups == 1:
            _accumulate_conv(out[:, :, r0:r1], sub, weight, sh, sw)
        else:
            for g in range(groups):
                _accumulate_conv(
                    out[:, g * cout_g : (g + 1) * cout_g, r0:r1],
                    sub[:, g * cin_g : (g + 1) * cin_g],
                    weight[g * cout_g : (g + 1) * cout_g],
                    sh,
                    sw,
                )

    threads = _num_threads
    if threads > 1 and oh >= 2 and out.size >= _PARALLEL_MIN_ELEMENTS:
        bounds = _chunk_bounds(oh, threads)
        with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
            list(pool.map(lambda b: fill(*b), bounds))
    else:
        fill(0, oh)

    if bias is not None:
        out += bias.reshape(1, -1, 1, 1)
    return Tensor._wrap(out)


def affine_norm(x: Tensor, norm: AffineNorm) -> Tensor:
    """Per channel: gamma * (x - mean) / sqrt(var + eps) + beta."""
    if x.c != norm.channels:
        raise ConfigurationError(f"input has {x.c} channels, norm has {norm.channels}")
    scale = norm.gamma / np.sqrt(norm.var + np.float32(norm.eps))
    out = x.data - norm.mean.reshape(1, -1, 1, 1)
    out *= scale.reshape(1, -1, 1, 1)
    out += norm.beta.reshape(1, -1, 1, 1)
    return Tensor._wrap(out)


def relu(x: Tensor) -> Tensor:
    return Tensor._wrap(np.maximum(x.data, np.float32(0)))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.dims != b.dims:
        raise ShapeError(f"add requires equal dims, got {a.dims} and {b.dims}")
    return Tensor._wrap(a.data + b.data)


def concat_channels(tensors) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ConfigurationError("concat_channels needs at least one tensor")
    ref = tensors[0]
    for t in tensors[1:]:
        if (t.n, t.h, t.w) != (ref.n, ref.h, ref.w):
            raise ShapeError(
                f"concat_channels requires matching (n, h, w), got {ref.dims} vs {t.dims}"
            )
    return Tensor._wrap(np.concatenate([t.data for t in tensors], axis=1))


def _window_sum(xp: np.ndarray, kh, kw, sh, sw, oh, ow) -> np.ndarray:
    """Windowed sum with sequential kernel-row then kernel-col accumulation."""
    out = np.zeros((xp.shape[0], xp.shape[1], oh, ow), np.float32)
    for ikh in range(kh):
        rows = xp[:, :, ikh : ikh + (oh - 1) * sh + 1 : sh, :]
        for ikw in range(kw):
            out += rows[:, :, :, ikw : ikw + (ow - 1) * sw + 1 : sw]
    return out


def _valid_counts(size: int, k: int, s: int, p: int, count: int) -> np.ndarray:
    starts = np.arange(count) * s - p
    return np.minimum(starts + k, size) - np.maximum(starts, 0)


def avg_pool(x: Tensor, kernel, stride, padding) -> Tensor:
    """Average pooling. Zero padding never dilutes: the divisor counts only
    positions inside the input (count_includes_pad = false)."""
    kh, kw = _pair(kernel, "kernel")
    sh, sw = _pair(stride, "stride")
    ph, pw = _pair(padding, "padding")
    if min(kh, kw) < 1 or min(sh, sw) < 1 or min(ph, pw) < 0:
        raise ConfigurationError("invalid pooling geometry")
    oh = (x.h + 2 * ph - kh) // sh + 1
    ow = (x.w + 2 * pw - kw) // sw + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"pool output would be {oh}x{ow} for input {x.h}x{x.w}")
    rows = _valid_counts(x.h, kh, sh, ph, oh)
    cols = _valid_counts(x.w, kw, sw, pw, ow)
    if rows.min() <= 0 or cols.min() <= 0:
        raise ShapeError("pooling window falls entirely inside the padding")
    xp = x.data
    if ph or pw:
        xp = np.pad(xp, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    out = _window_sum(xp, kh, kw, sh, sw, oh, ow)
    out /= np.outer(rows, cols).astype(np.float32)
    return Tensor._wrap(out)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over all spatial positions per channel, as a 1x1 map.

    Implemented as the degenerate full-window case of avg_pool so the two
    agree bit for bit.
    """
    out = _window_sum(x.data, x.h, x.w, 1, 1, 1, 1)
    out /= np.float32(x.h * x.w)
    return Tensor._wrap(out)


def _interp_axis(src: int, dst: int):
    pos = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
    pos = np.clip(pos, 0.0, src - 1)
    lo = np.floor(pos).astype(np.int64)
    lo = np.minimum(lo, src - 1)
    hi = np.minimum(lo + 1, src - 1)
    frac = (pos - lo).astype(np.float32)
    return lo, hi, frac


def bilinear_upsample(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear interpolation, align_corners = false.

    Source coordinate: (dst + 0.5) * (src_size / dst_size) - 0.5, clamped to
    the valid range. Uses the lerp form a + t * (b - a), which reproduces
    constant inputs exactly. Upsampling only.
    """
    if out_h < x.h or out_w < x.w:
        raise ShapeError(
            f"upsample target {out_h}x{out_w} smaller than input {x.h}x{x.w}"
        )
    if out_h == x.h and out_w == x.w:
        return x
    y0, y1, fy = _interp_axis(x.h, out_h)
    x0, x1, fx = _interp_axis(x.w, out_w)
    d = x.data
    r0 = d[:, :, y0, :]
    r1 = d[:, :, y1, :]
    fx = fx.reshape(1, 1, 1, -1)
    v00 = r0[:, :, :, x0]
    row0 = v00 + fx * (r0[:, :, :, x1] - v00)
    v10 = r1[:, :, :, x0]
    row1 = v10 + fx * (r1[:, :, :, x1] - v10)
    out = row0 + fy.reshape(1, 1, -1, 1) * (row1 - row0)
    return Tensor._wrap(out)
