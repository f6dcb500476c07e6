"""Training losses: main and auxiliary cross entropy, plus the boundary pair
(binary cross entropy and dice). All reductions are means so the loss weights
stay resolution independent. Internals run in float64 and results are Python
floats.

Total = L_seg + lambda1 * L_aux + lambda2 * (L_bce + L_dice) with defaults
lambda1 = 0.2 and lambda2 = 0.1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError, ShapeError
from .network import ForwardOutputs
from .tensor import Tensor


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.2
    lambda2: float = 0.1

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigurationError(
                f"loss weights must be >= 0, got ({self.lambda1}, {self.lambda2})"
            )


@dataclass(frozen=True)
class LossBreakdown:
    seg: float
    aux: float
    bce: float
    dice: float
    total: float

    @property
    def bound(self) -> float:
        return self.bce + self.dice


def _labels_array(labels, n, h, w) -> np.ndarray:
    a = np.asarray(labels)
    if a.ndim == 2:
        a = a[None]
    if a.shape != (n, h, w):
        raise ShapeError(f"labels shape {a.shape} does not match logits batch ({n}, {h}, {w})")
    if not np.issubdtype(a.dtype, np.integer):
        raise ShapeError(f"labels must be integer, got dtype {a.dtype}")
    return a


def cross_entropy(logits: Tensor, labels, ignore_value: int = 255) -> float:
    """Mean over non-ignored pixels of -log softmax(logits)[true class]."""
    lab = _labels_array(labels, logits.n, logits.h, logits.w)
    k = logits.c
    valid = lab != ignore_value
    if not valid.any():
        raise NumericError("cross entropy is undefined: every pixel is ignored")
    bad = valid & ((lab < 0) | (lab >= k))
    if bad.any():
        worst = int(lab[bad].max())
        raise ConfigurationError(f"label value {worst} out of range for {k} classes")

    x = logits.data.astype(np.float64)
    m = x.max(axis=1)
    logsumexp = m + np.log(np.exp(x - m[:, None]).sum(axis=1))
    idx = np.where(valid, lab, 0)
    true_logit = np.take_along_axis(x, idx[:, None].astype(np.int64), axis=1)[:, 0]
    per_pixel = logsumexp - true_logit
    return float(per_pixel[valid].mean())


def _boundary_pair(logits: Tensor, gt) -> tuple[np.ndarray, np.ndarray]:
    if logits.c != 1:
        raise ShapeError(f"boundary logits must have 1 channel, got {logits.c}")
    g = np.asarray(gt)
    if g.ndim == 2:
        g = g[None]
    if g.ndim == 4 and g.shape[1] == 1:
        g = g[:, 0]
    if g.shape != (logits.n, logits.h, logits.w):
        raise ShapeError(
            f"boundary target shape {g.shape} does not match logits "
            f"({logits.n}, 1, {logits.h}, {logits.w})"
        )
    g = g.astype(np.float64)
    if g.size and not np.isin(g, (0.0, 1.0)).all():
        raise ShapeError("boundary target must be binary (0/1)")
    return logits.data[:, 0].astype(np.float64), g


def bce_loss(boundary_logits: Tensor, gt) -> float:
    """Mean binary cross entropy in the stable fused form
    max(x, 0) - x*g + log(1 + exp(-|x|))."""
    x, g = _boundary_pair(boundary_logits, gt)
    per_pixel = np.maximum(x, 0.0) - x * g + np.log1p(np.exp(-np.abs(x)))
    return float(per_pixel.mean())


def dice_loss(boundary_logits: Tensor, gt) -> float:
    """1 - (2*sum(p*g) + eps) / (sum(p^2) + sum(g^2) + eps) with eps = 1,
    sums taken over all pixels of one batch item, then the mean over items."""
    x, g = _boundary_pair(boundary_logits, gt)
    p = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    eps = 1.0
    inter = (p * g).sum(axis=(1, 2))
    denom = (p * p).sum(axis=(1, 2)) + (g * g).sum(axis=(1, 2))
    per_item = 1.0 - (2.0 * inter + eps) / (denom + eps)
    return float(per_item.mean())


def total_loss(
    outputs: ForwardOutputs,
    labels,
    boundary_gt,
    weights: LossWeights = LossWeights(),
    ignore_value: int = 255,
) -> LossBreakdown:
    seg = cross_entropy(outputs.seg_logits, labels, ignore_value)
    aux = cross_entropy(outputs.aux_seg_logits, labels, ignore_value)
    bce = bce_loss(outputs.boundary_logits, boundary_gt)
    dice = dice_loss(outputs.boundary_logits, boundary_gt)
    total = seg + weights.lambda1 * aux + weights.lambda2 * (bce + dice)
    return LossBreakdown(seg, aux, bce, dice, float(total))
