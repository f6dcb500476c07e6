"""Network plan, weight store and the full forward pass.

The plan is a symbolic description of every layer (blocks, conv specs,
inferred output sizes) built for one input resolution. It supports shape-only
inference (describe, accounting) and execution (forward). The HRB stream runs
layers 1 to 12 at 1/8 scale after the early downsampling; the LRB stream runs
layers 6 to 13 down to 1/64 scale and ends in the ELPPM pyramid, whose output
is enlarged 8x back to 1/8 scale for fusion.

Weight initialization draws conv weights uniformly from
[-sqrt(6 / fan_in), +sqrt(6 / fan_in)] with fan_in = (C_in / groups) * kh * kw,
from a single numpy PCG64 generator consumed in parameter-manifest order.
Norms start as identity statistics (gamma 1, beta 0, mean 0, var 1) and biases
at 0; they consume no random draws. All norms use eps = 1e-5.

DRBW weight-store layout (little endian): magic "DRBW", u32 version 1,
u32 entry count, then per entry sorted by name: u32 name length, UTF-8 name,
u32 rank, rank u32 dims, then the float32 values in C order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .blocks import (
    ELPPM_POOLING,
    BFMParams,
    BoundaryHeadParams,
    ConvBN,
    EIBMParams,
    ELPPMParams,
    SegHeadParams,
    StemParams,
    bfm_forward,
    boundary_head_forward,
    eibm_forward,
    elppm_forward,
    seg_head_forward,
    stem_forward,
)
from .errors import ConfigurationError, FormatError, ShapeError
from .ops import AffineNorm, ConvSpec, add, bilinear_upsample, concat_channels
from .tensor import Tensor

NORM_EPS = 1e-5

# Hidden width of the two segmentation heads. Kept narrow so the whole model
# stays inside the published 2.3M-parameter / 11.9-GFLOP envelope that
# verify_claims checks.
HEAD_HIDDEN = 32

DRBW_MAGIC = b"DRBW"
DRBW_VERSION = 1

# Expected (label, stream, (c, h, w)) for every backbone layer at 1024x1024
# input. `describe --golden` and the acceptance suite compare against this.
REFERENCE_LAYOUT_1024 = (
    ("1", "hrb", (32, 512, 512)),
    ("2", "hrb", (32, 256, 256)),
    ("3", "hrb", (32, 256, 256)),
    ("4", "hrb", (64, 128, 128)),
    ("5", "hrb", (64, 128, 128)),
    ("6", "lrb", (128, 64, 64)),
    ("6", "hrb", (64, 128, 128)),
    ("7", "lrb", (128, 64, 64)),
    ("7", "hrb", (64, 128, 128)),
    ("8", "lrb", (128, 64, 64)),
    ("8", "hrb", (64, 128, 128)),
    ("9", "lrb", (256, 32, 32)),
    ("9", "hrb", (64, 128, 128)),
    ("10", "lrb", (256, 32, 32)),
    ("10", "hrb", (64, 128, 128)),
    ("11", "lrb", (256, 32, 32)),
    ("11", "hrb", (64, 128, 128)),
    ("12", "lrb", (512, 16, 16)),
    ("12", "hrb", (128, 128, 128)),
    ("13", "lrb", (128, 128, 128)),
)


@dataclass(frozen=True)
class ConvDef:
    """Symbolic conv unit: canonical name prefix plus spec and inferred output size."""

    name: str
    spec: ConvSpec
    has_norm: bool
    act: bool
    out_hw: tuple[int, int]


@dataclass(frozen=True)
class BlockDef:
    label: str
    kind: str  # stem | eibm | bfm | elppm | boundary_head | fusion | seg_head
    stream: str  # hrb | lrb | both
    outputs: tuple[tuple[str, tuple[int, int, int]], ...]  # (stream, (c, h, w))
    convs: tuple[ConvDef, ...]
    strided: bool = False
    gap: int = 0
    native_hw: tuple[int, int] | None = None  # ELPPM size before the 8x enlargement

    def output_for(self, stream: str) -> tuple[int, int, int]:
        for s, chw in self.outputs:
            if s == stream:
                return chw
        raise KeyError(f"block {self.label} has no {stream} output")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    shape: tuple[int, ...]
    kind: str  # conv | bias | gamma | beta | mean | var
    fan_in: int = 0


@dataclass(frozen=True)
class ForwardOutputs:
    """All logits at full input resolution. Boundary logits are pre-sigmoid."""

    seg_logits: Tensor
    aux_seg_logits: Tensor
    boundary_logits: Tensor


@dataclass(frozen=True)
class NetworkPlan:
    num_classes: int
    resolution: tuple[int, int]  # (h, w)
    head_hidden: int
    blocks: tuple[BlockDef, ...]

    def find(self, label: str, stream: str | None = None) -> BlockDef:
        for b in self.blocks:
            if b.label != label:
                continue
            if (
                stream is None
                or b.stream == stream
                or any(s == stream for s, _ in b.outputs)
            ):
                return b
        raise KeyError(f"no block {label!r} ({stream!r}) in plan")

    def layout_rows(self):
        """One (label, stream, kind, (c, h, w)) row per block output."""
        rows = []
        for b in self.blocks:
            for s, chw in b.outputs:
                rows.append((b.label, s, b.kind, chw))
        return rows

    def manifest(self) -> tuple[ParamSpec, ...]:
        """Every parameter tensor with its shape, in plan order. The name set
        is the contract for DRBW weight files."""
        entries = []
        for b in self.blocks:
            for cd in b.convs:
                spec = cd.spec
                fan_in = (spec.in_channels // spec.groups) * spec.kernel[0] * spec.kernel[1]
                entries.append(
                    ParamSpec(f"{cd.name}.weight", spec.weight_shape, "conv", fan_in)
                )
                if spec.has_bias:
                    entries.append(ParamSpec(f"{cd.name}.bias", (spec.out_channels,), "bias"))
                if cd.has_norm:
                    for p in ("gamma", "beta", "mean", "var"):
                        entries.append(
                            ParamSpec(f"{cd.name}.norm.{p}", (spec.out_channels,), p)
                        )
        return tuple(entries)


def _half(hw: tuple[int, int]) -> tuple[int, int]:
    return (hw[0] // 2, hw[1] // 2)


def _eibm_block(label, stream, cin, cout, strided, in_hw):
    out_hw = _half(in_hw) if strided else in_hw
    prefix = f"{stream}.layer{label}"
    mid = 2 * cin
    stride = (2, 2) if strided else (1, 1)
    convs = [
        ConvDef(f"{prefix}.expand", ConvSpec(cin, mid, (1, 1)), True, True, in_hw),
        ConvDef(
            f"{prefix}.dw1",
            ConvSpec(mid, mid, (3, 3), stride, (1, 1), groups=mid),
            True,
            True,
            out_hw,
        ),
        ConvDef(
            f"{prefix}.dw2",
            ConvSpec(mid, mid, (3, 3), (1, 1), (1, 1), groups=mid),
            True,
            True,
            out_hw,
        ),
        ConvDef(f"{prefix}.project", ConvSpec(mid, cout, (1, 1)), True, False, out_hw),
    ]
    if strided or cin != cout:
        convs.append(
            ConvDef(f"{prefix}.skip", ConvSpec(cin, cout, (1, 1), stride), True, False, out_hw)
        )
    block = BlockDef(
        label,
        "eibm",
        stream,
        ((stream, (cout, *out_hw)),),
        tuple(convs),
        strided=strided,
    )
    return block, out_hw


def _bfm_block(label, high_c, low_c, gap, high_hw, low_hw):
    prefix = f"bfm.layer{label}"
    convs = [
        ConvDef(f"{prefix}.low_to_high", ConvSpec(low_c, high_c, (1, 1)), True, False, low_hw)
    ]
    if gap == 2:
        convs.append(
            ConvDef(
                f"{prefix}.high_to_low1",
                ConvSpec(high_c, low_c, (3, 3), (2, 2), (1, 1)),
                True,
                False,
                low_hw,
            )
        )
    else:
        # Two stride-2 stages, channels doubling 64 -> 128 -> 256. The first
        # stage keeps the standard conv+norm+relu; the one feeding the
        # residual add stays linear.
        mid_c = high_c * 2
        mid_hw = _half(high_hw)
        convs.append(
            ConvDef(
                f"{prefix}.high_to_low1",
                ConvSpec(high_c, mid_c, (3, 3), (2, 2), (1, 1)),
                True,
                True,
                mid_hw,
            )
        )
        convs.append(
            ConvDef(
                f"{prefix}.high_to_low2",
                ConvSpec(mid_c, low_c, (3, 3), (2, 2), (1, 1)),
                True,
                False,
                low_hw,
            )
        )
    outputs = (("lrb", (low_c, *low_hw)), ("hrb", (high_c, *high_hw)))
    return BlockDef(label, "bfm", "both", outputs, tuple(convs), gap=gap)


def _pool_out(size: int, k: int, s: int, p: int) -> int:
    return (size + 2 * p - k) // s + 1


def _elppm_block(label, cin, native_hw, out_hw):
    c4 = cin // 4
    prefix = f"lrb.layer{label}"
    nh, nw = native_hw
    convs = [ConvDef(f"{prefix}.path0", ConvSpec(cin, c4, (1, 1)), True, True, native_hw)]
    for i, (k, s, p) in enumerate(ELPPM_POOLING, start=1):
        hw = (_pool_out(nh, k, s, p), _pool_out(nw, k, s, p))
        convs.append(ConvDef(f"{prefix}.path{i}", ConvSpec(cin, c4, (1, 1)), True, True, hw))
    convs.append(ConvDef(f"{prefix}.path4", ConvSpec(cin, c4, (1, 1)), True, True, (1, 1)))
    for i in range(1, 5):
        convs.append(
            ConvDef(
                f"{prefix}.hier{i}.dw",
                ConvSpec(c4, c4, (3, 3), (1, 1), (1, 1), groups=c4),
                True,
                False,
                native_hw,
            )
        )
        convs.append(
            ConvDef(f"{prefix}.hier{i}.pw", ConvSpec(c4, c4, (1, 1)), True, True, native_hw)
        )
    convs.append(ConvDef(f"{prefix}.fuse", ConvSpec(5 * c4, c4, (1, 1)), True, False, native_hw))
    convs.append(ConvDef(f"{prefix}.shortcut", ConvSpec(cin, c4, (1, 1)), True, False, native_hw))
    return BlockDef(
        label,
        "elppm",
        "lrb",
        (("lrb", (c4, *out_hw)),),
        tuple(convs),
        native_hw=native_hw,
    )


def build_plan(
    num_classes: int = 19,
    input_resolution: tuple[int, int] = (1024, 1024),
    head_hidden: int = HEAD_HIDDEN,
) -> NetworkPlan:
    """Build the symbolic layer plan for one input resolution (h, w)."""
    h, w = int(input_resolution[0]), int(input_resolution[1])
    if h < 64 or w < 64 or h % 64 or w % 64:
        raise ConfigurationError(f"resolution must be divisible by 64, got {h}x{w}")
    if num_classes < 1:
        raise ConfigurationError(f"num_classes must be >= 1, got {num_classes}")
    if head_hidden < 1:
        raise ConfigurationError("head_hidden must be >= 1")

    blocks: list[BlockDef] = []
    hw1 = (h // 2, w // 2)
    blocks.append(
        BlockDef(
            "1",
            "stem",
            "hrb",
            (("hrb", (32, *hw1)),),
            (
                ConvDef(
                    "stem", ConvSpec(3, 32, (3, 3), (2, 2), (1, 1)), True, True, hw1
                ),
            ),
            strided=True,
        )
    )
    b2, hw2 = _eibm_block("2", "hrb", 32, 32, True, hw1)
    b3, _ = _eibm_block("3", "hrb", 32, 32, False, hw2)
    b4, hw4 = _eibm_block("4", "hrb", 32, 64, True, hw2)
    b5, _ = _eibm_block("5", "hrb", 64, 64, False, hw4)
    blocks += [b2, b3, b4, b5]

    hrb_hw = hw4  # 1/8 scale; the HRB keeps it to the end
    l6, lrb_hw = _eibm_block("6", "lrb", 64, 128, True, hrb_hw)
    h6, _ = _eibm_block("6", "hrb", 64, 64, False, hrb_hw)
    l7, _ = _eibm_block("7", "lrb", 128, 128, False, lrb_hw)
    h7, _ = _eibm_block("7", "hrb", 64, 64, False, hrb_hw)
    bfm8 = _bfm_block("8", 64, 128, 2, hrb_hw, lrb_hw)
    l9, lrb_hw = _eibm_block("9", "lrb", 128, 256, True, lrb_hw)
    h9, _ = _eibm_block("9", "hrb", 64, 64, False, hrb_hw)
    l10, _ = _eibm_block("10", "lrb", 256, 256, False, lrb_hw)
    h10, _ = _eibm_block("10", "hrb", 64, 64, False, hrb_hw)
    bfm11 = _bfm_block("11", 64, 256, 4, hrb_hw, lrb_hw)
    l12, lrb_hw = _eibm_block("12", "lrb", 256, 512, True, lrb_hw)
    h12, _ = _eibm_block("12", "hrb", 64, 128, False, hrb_hw)
    elppm = _elppm_block("13", 512, lrb_hw, hrb_hw)
    blocks += [l6, h6, l7, h7, bfm8, l9, h9, l10, h10, bfm11, l12, h12, elppm]

    blocks.append(
        BlockDef(
            "boundary",
            "boundary_head",
            "hrb",
            (("hrb", (64, *hrb_hw)),),
            (
                ConvDef("head.boundary.feature", ConvSpec(64, 64, (1, 1)), True, True, hrb_hw),
                ConvDef(
                    "head.boundary.logit",
                    ConvSpec(64, 1, (1, 1), has_bias=True),
                    False,
                    False,
                    hrb_hw,
                ),
            ),
        )
    )
    blocks.append(
        BlockDef(
            "fusion",
            "fusion",
            "both",
            (("both", (128, *hrb_hw)),),
            (
                ConvDef("head.fusion", ConvSpec(128 + 64, 128, (1, 1)), True, True, hrb_hw),
            ),
        )
    )
    blocks.append(
        BlockDef(
            "seg",
            "seg_head",
            "both",
            (("both", (num_classes, *hrb_hw)),),
            (
                ConvDef(
                    "head.seg.hidden",
                    ConvSpec(128, head_hidden, (3, 3), (1, 1), (1, 1)),
                    True,
                    True,
                    hrb_hw,
                ),
                ConvDef(
                    "head.seg.logit",
                    ConvSpec(head_hidden, num_classes, (1, 1), has_bias=True),
                    False,
                    False,
                    hrb_hw,
                ),
            ),
        )
    )
    blocks.append(
        BlockDef(
            "aux",
            "seg_head",
            "lrb",
            (("lrb", (num_classes, *lrb_hw)),),
            (
                ConvDef(
                    "head.aux.hidden",
                    ConvSpec(512, head_hidden, (3, 3), (1, 1), (1, 1)),
                    True,
                    True,
                    lrb_hw,
                ),
                ConvDef(
                    "head.aux.logit",
                    ConvSpec(head_hidden, num_classes, (1, 1), has_bias=True),
                    False,
                    False,
                    lrb_hw,
                ),
            ),
        )
    )
    return NetworkPlan(num_classes, (h, w), head_hidden, tuple(blocks))


class WeightStore:
    """Named parameter tensors (float32 arrays of any rank)."""

    def __init__(self, tensors: dict[str, np.ndarray]):
        store: dict[str, np.ndarray] = {}
        for name, arr in tensors.items():
            if not isinstance(name, str) or not name:
                raise ConfigurationError(f"invalid tensor name {name!r}")
            a = np.ascontiguousarray(arr, dtype=np.float32)
            a.flags.writeable = False
            store[name] = a
        self._tensors = store

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._tensors))

    def element_count(self) -> int:
        return sum(int(a.size) for a in self._tensors.values())

    def sorted_items(self):
        return [(n, self._tensors[n]) for n in self.names()]


def init_weights(plan: NetworkPlan, seed: int) -> WeightStore:
    """Deterministic seeded initialization; see the module docstring."""
    gen = np.random.Generator(np.random.PCG64(seed))
    tensors: dict[str, np.ndarray] = {}
    for ps in plan.manifest():
        if ps.kind == "conv":
            bound = float(np.sqrt(6.0 / ps.fan_in))
            tensors[ps.name] = gen.uniform(-bound, bound, ps.shape).astype(np.float32)
        elif ps.kind in ("gamma", "var"):
            tensors[ps.name] = np.ones(ps.shape, np.float32)
        else:  # beta, mean, bias
            tensors[ps.name] = np.zeros(ps.shape, np.float32)
    return WeightStore(tensors)


def save_weights(store: WeightStore, path) -> None:
    with open(path, "wb") as f:
        f.write(DRBW_MAGIC)
        f.write(struct.pack("<II", DRBW_VERSION, len(store)))
        for name, arr in store.sorted_items():
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype(np.dtype("<f4"), copy=False).tobytes())


def load_weights(path) -> WeightStore:
    with open(path, "rb") as f:
        buf = f.read()

    pos = 0

    def take(count: int, what: str) -> bytes:
        nonlocal pos
        if pos + count > len(buf):
            raise FormatError(f"truncated DRBW file while reading {what} at byte {pos}")
        piece = buf[pos : pos + count]
        pos += count
        return piece

    magic = take(4, "magic")
    if magic != DRBW_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {DRBW_MAGIC!r}")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != DRBW_VERSION:
        raise FormatError(f"unsupported DRBW version {version}")
    (count,) = struct.unpack("<I", take(4, "entry count"))

    tensors: dict[str, np.ndarray] = {}
    prev = None
    for i in range(count):
        (name_len,) = struct.unpack("<I", take(4, f"name length of entry {i}"))
        try:
            name = take(name_len, f"name of entry {i}").decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"entry {i} name is not valid UTF-8") from e
        if name in tensors:
            raise FormatError(f"duplicate tensor name {name!r}")
        if prev is not None and name < prev:
            raise FormatError(f"entries not sorted by name: {name!r} after {prev!r}")
        (rank,) = struct.unpack("<I", take(4, f"rank of {name!r}"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, f"dims of {name!r}"))
        n_values = 1
        for d in dims:
            n_values *= d
        payload = take(4 * n_values, f"values of {name!r}")
        arr = np.frombuffer(payload, dtype=np.dtype("<f4")).reshape(dims)
        tensors[name] = arr.astype(np.float32)
        prev = name
    if pos != len(buf):
        raise FormatError(f"trailing bytes after last entry at byte {pos}")
    return WeightStore(tensors)


def check_cover(plan: NetworkPlan, store: WeightStore) -> None:
    """Exact cover: the store must hold the plan's names, nothing else."""
    expected = {ps.name for ps in plan.manifest()}
    have = set(store.names())
    missing = sorted(expected - have)
    extra = sorted(have - expected)
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing " + ", ".join(missing))
        if extra:
            parts.append("unexpected " + ", ".join(extra))
        raise ConfigurationError("weight store does not cover the plan: " + "; ".join(parts))


def _unit(store: WeightStore, cd: ConvDef) -> ConvBN:
    weight = store[f"{cd.name}.weight"]
    if weight.shape != cd.spec.weight_shape:
        raise ConfigurationError(
            f"tensor {cd.name + '.weight'!r} has shape {weight.shape}, "
            f"plan expects {cd.spec.weight_shape}"
        )
    bias = store[f"{cd.name}.bias"] if cd.spec.has_bias else None
    norm = None
    if cd.has_norm:
        vecs = {}
        for p in ("gamma", "beta", "mean", "var"):
            v = store[f"{cd.name}.norm.{p}"]
            if v.shape != (cd.spec.out_channels,):
                raise ConfigurationError(
                    f"tensor {cd.name}.norm.{p} has shape {v.shape}, "
                    f"plan expects ({cd.spec.out_channels},)"
                )
            vecs[p] = v
        norm = AffineNorm(vecs["gamma"], vecs["beta"], vecs["mean"], vecs["var"], NORM_EPS)
    return ConvBN(cd.spec, weight, bias, norm, cd.act)


def _materialize(plan: NetworkPlan, store: WeightStore) -> dict:
    out: dict[tuple[str, str], object] = {}
    for b in plan.blocks:
        units = [_unit(store, cd) for cd in b.convs]
        if b.kind == "stem":
            params: object = StemParams(units[0])
        elif b.kind == "eibm":
            skip = units[4] if len(units) == 5 else None
            params = EIBMParams(units[0], units[1], units[2], units[3], skip, b.strided)
        elif b.kind == "bfm":
            params = BFMParams(units[0], tuple(units[1:]), b.gap)
        elif b.kind == "elppm":
            params = ELPPMParams(
                paths=tuple(units[0:5]),
                hier=tuple((units[5 + 2 * i], units[6 + 2 * i]) for i in range(4)),
                fuse=units[13],
                shortcut=units[14],
            )
        elif b.kind == "boundary_head":
            params = BoundaryHeadParams(units[0], units[1])
        elif b.kind == "fusion":
            params = units[0]
        elif b.kind == "seg_head":
            params = SegHeadParams(units[0], units[1])
        else:
            raise ConfigurationError(f"unknown block kind {b.kind!r}")
        out[(b.label, b.stream)] = params
    return out


def forward(plan: NetworkPlan, store: WeightStore, x: Tensor) -> ForwardOutputs:
    """Run the network. Every intermediate is checked against the plan's shape
    inference and validated finite; violations name the offending layer."""
    if x.c != 3:
        raise ShapeError(f"input must have 3 channels, got {x.c}")
    if (x.h, x.w) != plan.resolution:
        raise ShapeError(
            f"input is {x.h}x{x.w} but the plan was built for "
            f"{plan.resolution[0]}x{plan.resolution[1]}"
        )
    if plan.resolution[0] // 64 < 8 or plan.resolution[1] // 64 < 8:
        raise ShapeError(
            "executable forward needs resolution >= 512x512 so the pyramid "
            "pooling sees at least 8x8"
        )
    check_cover(plan, store)
    m = _materialize(plan, store)

    def checked(label: str, stream: str, t: Tensor) -> Tensor:
        c, hh, ww = plan.find(label, None if stream == "both" else stream).output_for(stream)
        if (t.c, t.h, t.w) != (c, hh, ww):
            raise ShapeError(
                f"layer {label} ({stream}) produced {t.c}x{t.h}x{t.w}, "
                f"shape inference expected {c}x{hh}x{ww}"
            )
        t.require_finite(f"activation after layer {label} ({stream})")
        return t

    t = checked("1", "hrb", stem_forward(x, m[("1", "hrb")]))
    t = checked("2", "hrb", eibm_forward(t, m[("2", "hrb")]))
    t = checked("3", "hrb", eibm_forward(t, m[("3", "hrb")]))
    t = checked("4", "hrb", eibm_forward(t, m[("4", "hrb")]))
    t5 = checked("5", "hrb", eibm_forward(t, m[("5", "hrb")]))

    low = checked("6", "lrb", eibm_forward(t5, m[("6", "lrb")]))
    high = checked("6", "hrb", eibm_forward(t5, m[("6", "hrb")]))
    low = checked("7", "lrb", eibm_forward(low, m[("7", "lrb")]))
    high = checked("7", "hrb", eibm_forward(high, m[("7", "hrb")]))
    high, low = bfm_forward(high, low, m[("8", "both")])
    checked("8", "hrb", high)
    checked("8", "lrb", low)
    low = checked("9", "lrb", eibm_forward(low, m[("9", "lrb")]))
    high = checked("9", "hrb", eibm_forward(high, m[("9", "hrb")]))
    low = checked("10", "lrb", eibm_forward(low, m[("10", "lrb")]))
    high = checked("10", "hrb", eibm_forward(high, m[("10", "hrb")]))
    high, low = bfm_forward(high, low, m[("11", "both")])
    checked("11", "hrb", high)
    checked("11", "lrb", low)
    low12 = checked("12", "lrb", eibm_forward(low, m[("12", "lrb")]))
    high12 = checked("12", "hrb", eibm_forward(high, m[("12", "hrb")]))

    elppm_block = plan.find("13")
    context = elppm_forward(low12, m[("13", "lrb")])
    nh, nw = elppm_block.native_hw
    if (context.c, context.h, context.w) != (128, nh, nw):
        raise ShapeError(
            f"layer 13 (lrb) produced {context.c}x{context.h}x{context.w} before "
            f"enlargement, expected 128x{nh}x{nw}"
        )
    context = checked("13", "lrb", bilinear_upsample(context, high12.h, high12.w))

    bfeat, blogit = boundary_head_forward(t5, m[("boundary", "hrb")])
    checked("boundary", "hrb", bfeat)
    fused = checked(
        "fusion", "both", m[("fusion", "both")](concat_channels([add(high12, context), bfeat]))
    )
    seg8 = checked("seg", "both", seg_head_forward(fused, m[("seg", "both")]))
    aux64 = checked("aux", "lrb", seg_head_forward(low12, m[("aux", "lrb")]))

    seg = bilinear_upsample(seg8, x.h, x.w).require_finite("seg logits")
    aux = bilinear_upsample(aux64, x.h, x.w).require_finite("aux seg logits")
    bnd = bilinear_upsample(blogit, x.h, x.w).require_finite("boundary logits")
    return ForwardOutputs(seg, aux, bnd)
