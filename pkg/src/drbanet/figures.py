"""Figure rendering for the report paths. Imported lazily by the CLI so plain
text commands stay fast."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_cost_figure(reports, out_dir) -> str:
    """Per-layer parameter and MAC bars, one MAC series per resolution.
    Returns the written path."""
    reports = list(reports)
    base = reports[0]
    labels = [f"{r.label}/{r.stream}" for r in base.rows]
    y = np.arange(len(labels))

    fig, (ax_p, ax_m) = plt.subplots(1, 2, figsize=(11, 0.35 * len(labels) + 2), sharey=True)
    ax_p.barh(y, [r.params_total / 1e3 for r in base.rows], color="#4878d0")
    ax_p.set_xlabel("parameters (K)")
    ax_p.set_yticks(y, labels)
    ax_p.invert_yaxis()
    ax_p.set_title(f"parameters (total {base.params_total / 1e6:.2f} M)")

    height = 0.8 / max(len(reports), 1)
    for i, rep in enumerate(reports):
        offs = (i - (len(reports) - 1) / 2) * height
        ax_m.barh(
            y + offs,
            [r.macs / 1e9 for r in rep.rows],
            height=height,
            label=f"{rep.resolution_key()} ({rep.macs_total / 1e9:.2f} G)",
        )
    ax_m.set_xlabel("MACs (G)")
    ax_m.set_title("multiply-accumulates per layer")
    ax_m.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, "cost.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_iou_figure(names, iou, mean, out_dir) -> str:
    """Per-class IoU bars with the mean marked. Returns the written path."""
    names = list(names)
    values = np.asarray(iou, dtype=float)
    y = np.arange(len(names))
    shown = np.where(np.isnan(values), 0.0, values)

    fig, ax = plt.subplots(figsize=(8, 0.3 * len(names) + 1.5))
    colors = ["#cccccc" if np.isnan(v) else "#55a868" for v in values]
    ax.barh(y, shown, color=colors)
    ax.set_yticks(y, names)
    ax.invert_yaxis()
    ax.set_xlim(0, 1)
    ax.axvline(mean, color="#c44e52", linestyle="--", label=f"mIoU {mean:.4f}")
    ax.set_xlabel("IoU (grey = class absent)")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, "iou.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
