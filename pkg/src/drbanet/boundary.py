"""Boundary ground-truth extraction from integer label maps.

The pipeline, per stride s in (1, 2, 4): cast the labels to float32, pad one
pixel by edge replication, convolve with the 3x3 Laplacian
[[-1,-1,-1],[-1,8,-1],[-1,-1,-1]] at stride s (output ceil(h/s) x ceil(w/s)),
take absolute values, binarize at >= 0.1, and bilinearly upsample back to the
input size. The three maps are combined by a weighted sum (default equal
weights 1/3) and binarized again at >= 0.1. Finally any boundary pixel whose
3x3 neighborhood in the original labels contains the ignore value is cleared.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, ShapeError
from .ops import ConvSpec, bilinear_upsample, conv2d
from .tensor import Tensor

BOUNDARY_THRESHOLD = 0.1
BOUNDARY_STRIDES = (1, 2, 4)

LAPLACIAN_3X3 = np.array(
    [[-1.0, -1.0, -1.0], [-1.0, 8.0, -1.0], [-1.0, -1.0, -1.0]], dtype=np.float32
)


class LabelMap:
    """2-D integer class-id map (h, w), values in [0, 255]."""

    def __init__(self, values: np.ndarray):
        a = np.asarray(values)
        if a.ndim != 2:
            raise ShapeError(f"label map must be 2-D, got shape {a.shape}")
        if not np.issubdtype(a.dtype, np.integer):
            raise ShapeError(f"label map must be integer, got dtype {a.dtype}")
        if a.size and (a.min() < 0 or a.max() > 255):
            raise ShapeError("label map values must be in [0, 255]")
        self._values = np.ascontiguousarray(a, dtype=np.uint8)
        self._values.flags.writeable = False

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape


class BoundaryMap:
    """2-D binary map (h, w), uint8 values in {0, 1}."""

    def __init__(self, values: np.ndarray):
        a = np.asarray(values)
        if a.ndim != 2:
            raise ShapeError(f"boundary map must be 2-D, got shape {a.shape}")
        mask = np.ascontiguousarray(a != 0).astype(np.uint8)
        mask.flags.writeable = False
        self._values = mask

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    def density(self) -> float:
        return float(self._values.mean()) if self._values.size else 0.0


def laplacian_response(labels: LabelMap, stride: int) -> Tensor:
    """|Laplacian| of the float-cast labels at one stride, edge padded so the
    output is ceil(h/s) x ceil(w/s). Returns a (1, 1, h', w') tensor."""
    if stride not in BOUNDARY_STRIDES:
        raise ConfigurationError(f"stride must be one of {BOUNDARY_STRIDES}, got {stride}")
    padded = np.pad(labels.values.astype(np.float32), 1, mode="edge")
    x = Tensor(padded[None, None])
    weight = LAPLACIAN_3X3.reshape(1, 1, 3, 3)
    spec = ConvSpec(1, 1, (3, 3), (stride, stride), (0, 0))
    out = conv2d(x, weight, None, spec)
    return Tensor(np.abs(out.data))


def boundary_ground_truth(
    labels: LabelMap,
    weights: tuple[float, float, float] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
    ignore_value: int = 255,
) -> BoundaryMap:
    """Multi-scale boundary map; see the module docstring for the pipeline."""
    if len(weights) != len(BOUNDARY_STRIDES):
        raise ShapeError(f"expected {len(BOUNDARY_STRIDES)} weights, got {len(weights)}")
    ws = [float(v) for v in weights]
    if any(v < 0 for v in ws) or not any(v > 0 for v in ws):
        raise ShapeError("weights must be non-negative and not all zero")

    h, w = labels.shape
    if h <= 2 or w <= 2:
        raise ShapeError(f"label map {h}x{w} too small for boundary extraction")
    fused = np.zeros((h, w), dtype=np.float32)
    for weight_value, stride in zip(ws, BOUNDARY_STRIDES):
        resp = laplacian_response(labels, stride)
        binary = (resp.data >= BOUNDARY_THRESHOLD).astype(np.float32)
        back = bilinear_upsample(Tensor(binary), h, w)
        fused += np.float32(weight_value) * back.data[0, 0]
    boundary = (fused >= BOUNDARY_THRESHOLD).astype(np.uint8)

    ignore = (labels.values == ignore_value)
    if ignore.any():
        # Clear boundary pixels whose 3x3 neighborhood (edge replicated at the
        # border) touches an ignored pixel.
        padded = np.pad(ignore, 1, mode="edge")
        near = np.zeros((h, w), dtype=bool)
        for dy in range(3):
            for dx in range(3):
                near |= padded[dy : dy + h, dx : dx + w]
        boundary[near] = 0
    return BoundaryMap(boundary)
