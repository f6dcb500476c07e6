"""Evaluation metrics: confusion matrix accumulation and mean IoU.

Rows index ground truth, columns index prediction. Pixels whose ground truth
equals the ignore value are skipped. Classes that never appear (zero IoU
denominator) are excluded from the mean.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, NumericError, ShapeError
from .tensor import Tensor

# Default class names for the standard 19-class urban-scene label set.
CLASS_NAMES_19 = (
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic_light",
    "traffic_sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
)


def class_names(num_classes: int) -> tuple[str, ...]:
    if num_classes == len(CLASS_NAMES_19):
        return CLASS_NAMES_19
    return tuple(f"class{i:02d}" for i in range(num_classes))


class ConfusionMatrix:
    def __init__(self, num_classes: int, ignore_value: int = 255):
        if num_classes < 1:
            raise ConfigurationError(f"num_classes must be >= 1, got {num_classes}")
        self.num_classes = num_classes
        self.ignore_value = ignore_value
        self._counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    @property
    def counts(self) -> np.ndarray:
        view = self._counts.view()
        view.flags.writeable = False
        return view

    def total(self) -> int:
        return int(self._counts.sum())

    def update_labels(self, pred, gt) -> "ConfusionMatrix":
        p = np.asarray(pred)
        g = np.asarray(gt)
        if p.shape != g.shape:
            raise ShapeError(f"prediction shape {p.shape} != ground truth shape {g.shape}")
        if not np.issubdtype(p.dtype, np.integer) or not np.issubdtype(g.dtype, np.integer):
            raise ShapeError("predictions and ground truth must be integer label maps")
        p = p.reshape(-1).astype(np.int64)
        g = g.reshape(-1).astype(np.int64)
        keep = g != self.ignore_value
        p = p[keep]
        g = g[keep]
        k = self.num_classes
        if g.size:
            if g.min() < 0 or g.max() >= k:
                raise ConfigurationError(
                    f"ground truth value {int(g.max())} out of range for {k} classes"
                )
            if p.min() < 0 or p.max() >= k:
                raise ConfigurationError(
                    f"prediction value {int(p.max())} out of range for {k} classes"
                )
            self._counts += np.bincount(g * k + p, minlength=k * k).reshape(k, k)
        return self

    def update_logits(self, logits: Tensor, gt) -> "ConfusionMatrix":
        """Argmax over the class axis (ties resolve to the lowest index)."""
        if logits.c != self.num_classes:
            raise ShapeError(
                f"logits have {logits.c} channels, matrix expects {self.num_classes}"
            )
        pred = np.argmax(logits.data, axis=1).astype(np.int64)
        g = np.asarray(gt)
        if g.ndim == 2:
            g = g[None]
        return self.update_labels(pred, g)

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if (other.num_classes, other.ignore_value) != (self.num_classes, self.ignore_value):
            raise ConfigurationError(
                "cannot merge confusion matrices with different class counts "
                "or ignore values"
            )
        out = ConfusionMatrix(self.num_classes, self.ignore_value)
        out._counts = self._counts + other._counts
        return out

    def per_class_iou(self) -> np.ndarray:
        """IoU per class, NaN where the class never occurs on either side."""
        cm = self._counts.astype(np.float64)
        tp = np.diag(cm)
        denom = cm.sum(axis=1) + cm.sum(axis=0) - tp
        iou = np.full(self.num_classes, np.nan)
        present = denom > 0
        iou[present] = tp[present] / denom[present]
        return iou

    def miou(self) -> tuple[np.ndarray, float]:
        iou = self.per_class_iou()
        valid = ~np.isnan(iou)
        if not valid.any():
            raise NumericError("mIoU is undefined: no class is present")
        return iou, float(iou[valid].mean())

    def report(self, names: tuple[str, ...] | None = None) -> str:
        names = names or class_names(self.num_classes)
        iou, mean = self.miou()
        width = max(len(n) for n in names)
        lines = [f"{'class'.ljust(width)}  IoU"]
        for name, value in zip(names, iou):
            shown = "absent" if np.isnan(value) else f"{value:.6f}"
            lines.append(f"{name.ljust(width)}  {shown}")
        lines.append(f"{'mIoU'.ljust(width)}  {mean:.6f}")
        return "\n".join(lines)

    def machine_lines(self, names: tuple[str, ...] | None = None) -> list[str]:
        names = names or class_names(self.num_classes)
        iou, mean = self.miou()
        lines = [f"miou={mean:.6f}"]
        for name, value in zip(names, iou):
            if not np.isnan(value):
                lines.append(f"iou.{name}={value:.6f}")
        return lines
