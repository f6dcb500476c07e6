"""Command-line interface.

Subcommands: describe, count, forward, boundary-gt, eval, loss. Exit codes:
0 success, 1 contract or verification failure, 2 usage or file-format error.
"""

from __future__ import annotations

import argparse
import os
import re
import sys

import numpy as np

from . import ops
from .accounting import count_macs, verify_claims
from .boundary import BOUNDARY_STRIDES, LabelMap, boundary_ground_truth
from .errors import ConfigurationError, DRBANetError, FormatError
from .losses import LossWeights, total_loss
from .metrics import ConfusionMatrix, class_names
from .network import (
    REFERENCE_LAYOUT_1024,
    ForwardOutputs,
    build_plan,
    forward,
    init_weights,
    load_weights,
    save_weights,
)
from .pgm import read_pgm, write_pgm
from .tensor import Tensor, read_tensor, write_tensor


def _resolution(text: str) -> tuple[int, int]:
    """Parse WxH into internal (h, w)."""
    m = re.fullmatch(r"(\d+)[xX](\d+)", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    w, h = int(m.group(1)), int(m.group(2))
    if w < 64 or h < 64 or w % 64 or h % 64:
        raise argparse.ArgumentTypeError(f"resolution must be divisible by 64, got {w}x{h}")
    return (h, w)


def _weights_triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated weights, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric weight in {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--resolution",
        type=_resolution,
        default=(1024, 1024),
        metavar="WxH",
        help="input resolution, width first (default 1024x1024)",
    )
    common.add_argument("--classes", type=int, default=19, metavar="K")
    common.add_argument("--seed", type=int, default=0, metavar="N")
    common.add_argument("--machine", action="store_true", help="key=value output only")
    common.add_argument("--threads", type=int, default=1, metavar="N")
    common.add_argument("--ignore-value", type=int, default=255, metavar="V")

    parser = argparse.ArgumentParser(
        prog="drbanet",
        description="Dual-resolution segmentation network: reference "
        "implementation and verification tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", parents=[common], help="print the layer table")
    p.add_argument(
        "--golden",
        action="store_true",
        help="exit 1 unless the table matches the embedded 1024x1024 reference",
    )
    p.add_argument("--params", action="store_true", help="also list every parameter tensor")
    p.set_defaults(func=_cmd_describe)

    p = sub.add_parser("count", parents=[common], help="parameter and MAC accounting")
    p.add_argument(
        "--verify",
        action="store_true",
        help="check the published size/cost claims at 1024x1024 and 2048x1024",
    )
    p.add_argument("--figures", metavar="DIR", help="also render cost figures into DIR")
    p.set_defaults(func=_cmd_count)

    p = sub.add_parser("forward", parents=[common], help="run the network on a DRBT tensor")
    p.add_argument("--input", required=True, metavar="FILE.drbt")
    p.add_argument("--out-dir", required=True, metavar="DIR")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--weights", metavar="FILE.drbw", help="load weights from a DRBW file")
    group.add_argument(
        "--random-seed",
        type=int,
        metavar="N",
        help="seeded random initialization (default: --seed)",
    )
    p.add_argument("--save-weights", metavar="FILE.drbw", help="write the weights used")
    p.add_argument("--argmax", metavar="FILE.pgm", help="write the argmax class map as PGM")
    p.set_defaults(func=_cmd_forward)

    p = sub.add_parser(
        "boundary-gt", parents=[common], help="boundary ground truth from a label PGM"
    )
    p.add_argument("--input", required=True, metavar="LABELS.pgm")
    p.add_argument("--output", required=True, metavar="BOUNDARY.pgm")
    p.add_argument(
        "--boundary-weights",
        type=_weights_triple,
        default=(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
        metavar="A,B,C",
        help=f"fusion weights for strides {BOUNDARY_STRIDES} (default equal thirds)",
    )
    p.set_defaults(func=_cmd_boundary_gt)

    p = sub.add_parser("eval", parents=[common], help="mIoU over paired PGM directories")
    p.add_argument("--pred", required=True, metavar="DIR")
    p.add_argument("--gt", required=True, metavar="DIR")
    p.add_argument("--figures", metavar="DIR", help="also render an IoU figure into DIR")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("loss", parents=[common], help="loss breakdown from saved outputs")
    p.add_argument("--seg", required=True, metavar="FILE.drbt")
    p.add_argument("--aux", required=True, metavar="FILE.drbt")
    p.add_argument("--boundary", required=True, metavar="FILE.drbt")
    p.add_argument("--labels", required=True, metavar="LABELS.pgm")
    p.add_argument(
        "--boundary-gt",
        metavar="FILE.pgm",
        help="boundary target PGM; derived from the labels when omitted",
    )
    p.add_argument("--lambda1", type=float, default=0.2)
    p.add_argument("--lambda2", type=float, default=0.1)
    p.set_defaults(func=_cmd_loss)
    return parser


def _emit(args, human_lines, machine_lines):
    for line in machine_lines if args.machine else human_lines:
        print(line)


def _cmd_describe(args) -> int:
    plan = build_plan(args.classes, args.resolution)
    rows = plan.layout_rows()
    human = []
    width = max(len(label) for label, *_ in rows)
    human.append(f"{'layer'.ljust(width)}  stream  kind           output (CxHxW)")
    for label, stream, kind, (c, h, w) in rows:
        human.append(f"{label.ljust(width)}  {stream:<6}  {kind:<13}  {c}x{h}x{w}")
    machine = [f"resolution={args.resolution[1]}x{args.resolution[0]}"]
    for label, stream, _, (c, h, w) in rows:
        machine.append(f"layer.{label}.{stream}.size={c}x{h}x{w}")
    if args.params:
        human.append("")
        human.append("parameter tensors:")
        for ps in plan.manifest():
            shape = "x".join(str(d) for d in ps.shape)
            human.append(f"  {ps.name}  {shape}")
            machine.append(f"param.{ps.name}={shape}")
    _emit(args, human, machine)

    if args.golden:
        got = [(label, stream, chw) for label, stream, _, chw in rows if label[0].isdigit()]
        expected = list(REFERENCE_LAYOUT_1024)
        if got != expected:
            mismatches = [
                f"layer {el} ({es}): expected {ec}, got {gc}"
                for (el, es, ec), (gl, gs, gc) in zip(expected, got)
                if (el, es, ec) != (gl, gs, gc)
            ]
            if len(got) != len(expected):
                mismatches.append(f"row count {len(got)} != {len(expected)}")
            print("golden check FAILED:", file=sys.stderr)
            for m in mismatches:
                print(f"  {m}", file=sys.stderr)
            return 1
        print("golden check PASS" if not args.machine else "golden=PASS")
    return 0


def _cmd_count(args) -> int:
    plan = build_plan(args.classes, args.resolution)
    if args.verify:
        resolutions = [(1024, 1024), (1024, 2048)]
        reports = [count_macs(plan, r) for r in resolutions]
    else:
        reports = [count_macs(plan)]

    human: list[str] = []
    machine: list[str] = []
    for rep in reports:
        human.append(rep.table())
        human.append("")
        machine.extend(rep.machine_lines())

    code = 0
    if args.verify:
        verdict = verify_claims(reports)
        human.extend(verdict.lines())
        machine.extend(verdict.machine_lines())
        if not verdict.passed:
            code = 1
    _emit(args, human, machine)

    if args.figures:
        from .figures import render_cost_figure

        os.makedirs(args.figures, exist_ok=True)
        path = render_cost_figure(reports, args.figures)
        print(f"figure written: {path}")
    return code


def _cmd_forward(args) -> int:
    x = read_tensor(args.input)
    plan = build_plan(args.classes, (x.h, x.w))
    ops.set_num_threads(args.threads)
    if args.weights:
        store = load_weights(args.weights)
    else:
        seed = args.random_seed if args.random_seed is not None else args.seed
        store = init_weights(plan, seed)
    if args.save_weights:
        save_weights(store, args.save_weights)
    out = forward(plan, store, x)

    os.makedirs(args.out_dir, exist_ok=True)
    paths = {
        "seg": os.path.join(args.out_dir, "seg.drbt"),
        "aux": os.path.join(args.out_dir, "aux.drbt"),
        "boundary": os.path.join(args.out_dir, "boundary.drbt"),
    }
    write_tensor(out.seg_logits, paths["seg"])
    write_tensor(out.aux_seg_logits, paths["aux"])
    write_tensor(out.boundary_logits, paths["boundary"])
    lines = [f"{name}={p}" for name, p in paths.items()]
    if args.argmax:
        if out.seg_logits.n != 1:
            raise ConfigurationError("--argmax needs a batch of exactly one image")
        if args.classes > 256:
            raise ConfigurationError("--argmax PGM output supports at most 256 classes")
        classes = np.argmax(out.seg_logits.data[0], axis=0).astype(np.uint8)
        write_pgm(classes, args.argmax)
        lines.append(f"argmax={args.argmax}")
    _emit(args, lines, lines)
    return 0


def _cmd_boundary_gt(args) -> int:
    labels = LabelMap(read_pgm(args.input))
    boundary = boundary_ground_truth(labels, args.boundary_weights, args.ignore_value)
    write_pgm(boundary.values * np.uint8(255), args.output)
    line = f"boundary={args.output} density={boundary.density():.6f}"
    _emit(args, [line], [f"boundary.density={boundary.density():.6f}"])
    return 0


def _pgm_stems(directory: str) -> dict[str, str]:
    out = {}
    for entry in sorted(os.listdir(directory)):
        if entry.endswith(".pgm"):
            out[entry[: -len(".pgm")]] = os.path.join(directory, entry)
    return out


def _cmd_eval(args) -> int:
    pred = _pgm_stems(args.pred)
    gt = _pgm_stems(args.gt)
    only_pred = sorted(set(pred) - set(gt))
    only_gt = sorted(set(gt) - set(pred))
    if only_pred or only_gt:
        parts = []
        if only_pred:
            parts.append("prediction without ground truth: " + ", ".join(only_pred))
        if only_gt:
            parts.append("ground truth without prediction: " + ", ".join(only_gt))
        raise ConfigurationError("unpaired files; " + "; ".join(parts))
    if not pred:
        raise ConfigurationError("no .pgm files to evaluate")

    cm = ConfusionMatrix(args.classes, args.ignore_value)
    for stem in sorted(pred):
        cm.update_labels(read_pgm(pred[stem]), read_pgm(gt[stem]))
    names = class_names(args.classes)
    _emit(args, [cm.report(names)], cm.machine_lines(names))

    if args.figures:
        from .figures import render_iou_figure

        iou, mean = cm.miou()
        os.makedirs(args.figures, exist_ok=True)
        path = render_iou_figure(names, iou, mean, args.figures)
        print(f"figure written: {path}")
    return 0


def _cmd_loss(args) -> int:
    seg = read_tensor(args.seg)
    aux = read_tensor(args.aux)
    bnd = read_tensor(args.boundary)
    labels_img = read_pgm(args.labels)
    labels = labels_img[None].astype(np.int64)
    if args.boundary_gt:
        target = (read_pgm(args.boundary_gt) != 0).astype(np.uint8)[None]
    else:
        target = boundary_ground_truth(
            LabelMap(labels_img), ignore_value=args.ignore_value
        ).values[None]
    outputs = ForwardOutputs(seg, aux, bnd)
    breakdown = total_loss(
        outputs,
        labels,
        target,
        LossWeights(args.lambda1, args.lambda2),
        args.ignore_value,
    )
    human = [
        f"seg   {breakdown.seg:.6f}",
        f"aux   {breakdown.aux:.6f}",
        f"bce   {breakdown.bce:.6f}",
        f"dice  {breakdown.dice:.6f}",
        f"total {breakdown.total:.6f}",
    ]
    machine = [
        f"loss.seg={breakdown.seg:.10f}",
        f"loss.aux={breakdown.aux:.10f}",
        f"loss.bce={breakdown.bce:.10f}",
        f"loss.dice={breakdown.dice:.10f}",
        f"loss.total={breakdown.total:.10f}",
    ]
    _emit(args, human, machine)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DRBANetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
