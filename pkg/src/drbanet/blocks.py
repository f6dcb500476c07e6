"""DRBANet building blocks: stem, EIBM, BFM, ELPPM, and the output heads.

Parameter containers hold materialized arrays; the companion ConvDef
descriptors used for weight manifests and cost accounting live in the
network module. Activation convention: conv -> norm -> relu everywhere
except convs that feed a residual add (linear, norm only) and the biased
1x1 head output convs (no norm, no relu).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError
from .ops import (
    AffineNorm,
    ConvSpec,
    add,
    avg_pool,
    bilinear_upsample,
    concat_channels,
    conv2d,
    global_avg_pool,
    relu,
)
from .tensor import Tensor

# (kernel, stride, padding) of the three strided ELPPM pooling paths; the
# fifth path is a global average pool.
ELPPM_POOLING = ((5, 2, 2), (9, 4, 4), (17, 8, 8))


@dataclass(frozen=True)
class ConvBN:
    """One conv unit: convolution, optional affine norm, optional relu."""

    spec: ConvSpec
    weight: np.ndarray
    bias: np.ndarray | None = None
    norm: AffineNorm | None = None
    act: bool = False

    def __call__(self, x: Tensor) -> Tensor:
        from .ops import affine_norm

        y = conv2d(x, self.weight, self.bias, self.spec)
        if self.norm is not None:
            y = affine_norm(y, self.norm)
        if self.act:
            y = relu(y)
        return y


@dataclass(frozen=True)
class StemParams:
    conv: ConvBN


def stem_forward(x: Tensor, p: StemParams) -> Tensor:
    """3x3 stride-2 conv + norm + relu. Halves the resolution."""
    return p.conv(x)


@dataclass(frozen=True)
class EIBMParams:
    """Efficient inverted bottleneck: expand 2x, two depthwise 3x3 convs,
    linear projection, residual skip."""

    expand: ConvBN
    dw1: ConvBN
    dw2: ConvBN
    project: ConvBN
    skip: ConvBN | None
    strided: bool


def eibm_forward(x: Tensor, p: EIBMParams) -> Tensor:
    main = p.expand(x)
    main = p.dw1(main)
    main = p.dw2(main)
    main = p.project(main)
    shortcut = p.skip(x) if p.skip is not None else x
    # Linear bottleneck: no activation after the residual add.
    return add(main, shortcut)


@dataclass(frozen=True)
class BFMParams:
    """Bilateral fusion between the detail (high) and context (low) branches."""

    low_to_high: ConvBN
    high_to_low: tuple[ConvBN, ...]
    gap: int  # spatial ratio high/low, 2 or 4


def bfm_forward(x_high: Tensor, x_low: Tensor, p: BFMParams) -> tuple[Tensor, Tensor]:
    if x_high.h != x_low.h * p.gap or x_high.w != x_low.w * p.gap:
        raise ShapeError(
            f"BFM gap {p.gap} does not relate {x_high.dims} to {x_low.dims}"
        )
    up = bilinear_upsample(p.low_to_high(x_low), x_high.h, x_high.w)
    high_out = relu(add(x_high, up))
    down = x_high
    for conv in p.high_to_low:
        down = conv(down)
    low_out = relu(add(x_low, down))
    return high_out, low_out


@dataclass(frozen=True)
class ELPPMParams:
    """Efficient lightweight pyramid pooling: five pooled paths narrowed to
    C/4, hierarchically refined, fused and added to a 1x1 shortcut."""

    paths: tuple[ConvBN, ...]  # five 1x1 convs, C -> C/4
    hier: tuple[tuple[ConvBN, ConvBN], ...]  # (depthwise 3x3, pointwise 1x1) x 4
    fuse: ConvBN
    shortcut: ConvBN


@dataclass(frozen=True)
class ELPPMState:
    """Introspection record of one ELPPM evaluation."""

    f_in: Tensor
    pooled: tuple[Tensor, ...]
    f_mid: tuple[Tensor, ...]
    f_out: tuple[Tensor, ...]
    f_fused: Tensor
    f_final: Tensor


def elppm_forward(x: Tensor, p: ELPPMParams, return_state: bool = False):
    if x.c % 4:
        raise ConfigurationError(f"ELPPM needs channels divisible by 4, got {x.c}")
    if x.h < 8 or x.w < 8:
        raise ShapeError(f"ELPPM needs spatial dims >= 8, got {x.h}x{x.w}")
    pooled = [x]
    for k, s, pad in ELPPM_POOLING:
        pooled.append(avg_pool(x, k, s, pad))
    pooled.append(global_avg_pool(x))

    f_mid = []
    for i, path in enumerate(p.paths):
        t = path(pooled[i])
        if i > 0:
            t = bilinear_upsample(t, x.h, x.w)
        f_mid.append(t)

    # Hierarchical refinement: each path folds in its predecessor's output.
    f_out = [f_mid[0]]
    for i in range(1, 5):
        dw, pw = p.hier[i - 1]
        f_out.append(pw(dw(add(f_mid[i], f_out[i - 1]))))

    f_fused = p.fuse(concat_channels(f_out))
    f_final = add(f_fused, p.shortcut(x))
    if return_state:
        state = ELPPMState(
            f_in=x,
            pooled=tuple(pooled),
            f_mid=tuple(f_mid),
            f_out=tuple(f_out),
            f_fused=f_fused,
            f_final=f_final,
        )
        return f_final, state
    return f_final


@dataclass(frozen=True)
class BoundaryHeadParams:
    feature: ConvBN  # 1x1, C -> C, norm + relu
    logit: ConvBN  # 1x1 with bias, C -> 1


def boundary_head_forward(x: Tensor, p: BoundaryHeadParams) -> tuple[Tensor, Tensor]:
    """Returns (feature map for fusion, single-channel boundary logits).

    Boundary probability is logistic(logit); the head itself stays in logit
    space so the losses can use the numerically stable forms.
    """
    feat = p.feature(x)
    return feat, p.logit(feat)


@dataclass(frozen=True)
class SegHeadParams:
    hidden: ConvBN  # 3x3 pad 1, norm + relu
    logit: ConvBN  # 1x1 with bias, hidden -> num_classes


def seg_head_forward(x: Tensor, p: SegHeadParams) -> Tensor:
    return p.logit(p.hidden(x))
