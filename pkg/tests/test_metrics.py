"""Confusion-matrix bookkeeping and IoU aggregation, including the exact
integer properties that make streaming evaluation safe."""

import numpy as np
import pytest

from drbanet import (
    CLASS_NAMES_19,
    ConfigurationError,
    ConfusionMatrix,
    NumericError,
    ShapeError,
    Tensor,
    class_names,
)
from oracles import miou_ref


def _random_case(seed, k=4, shape=(2, 6, 6)):
    rng = np.random.default_rng(seed)
    pred = rng.integers(0, k, size=shape)
    gt = rng.integers(0, k, size=shape)
    gt[rng.random(shape) < 0.1] = 255
    return pred, gt


def test_perfect_prediction_scores_one():
    rng = np.random.default_rng(3)
    gt = rng.integers(0, 5, size=(3, 8, 8))
    cm = ConfusionMatrix(5).update_labels(gt, gt)
    iou, mean = cm.miou()
    present = ~np.isnan(iou)
    assert (iou[present] == 1.0).all()
    assert mean == 1.0


def test_half_and_half_quarter_miou():
    gt = np.zeros((4, 8), dtype=np.int64)
    gt[:, 4:] = 1
    pred = np.zeros((4, 8), dtype=np.int64)
    cm = ConfusionMatrix(2).update_labels(pred, gt)
    iou, mean = cm.miou()
    # Class 0: intersection 16, union 32.  Class 1: intersection 0, union 16.
    assert iou[0] == 0.5
    assert iou[1] == 0.0
    assert mean == 0.25


def test_streaming_equals_single_shot():
    pred, gt = _random_case(7, shape=(4, 6, 6))
    whole = ConfusionMatrix(4).update_labels(pred, gt)
    parts = ConfusionMatrix(4)
    for i in range(4):
        parts.update_labels(pred[i], gt[i])
    assert np.array_equal(whole.counts, parts.counts)
    assert whole.miou()[1] == parts.miou()[1]


def test_update_order_does_not_matter():
    pred, gt = _random_case(11, shape=(4, 5, 5))
    forward = ConfusionMatrix(4)
    backward = ConfusionMatrix(4)
    for i in range(4):
        forward.update_labels(pred[i], gt[i])
        backward.update_labels(pred[3 - i], gt[3 - i])
    assert np.array_equal(forward.counts, backward.counts)


def test_merge_is_commutative_and_associative():
    cases = [_random_case(seed, shape=(1, 5, 5)) for seed in (13, 17, 19)]
    mats = [ConfusionMatrix(4).update_labels(p, g) for p, g in cases]
    a, b, c = mats
    ab = a.merge(b)
    ba = b.merge(a)
    assert np.array_equal(ab.counts, ba.counts)
    assert np.array_equal(ab.merge(c).counts, a.merge(b.merge(c)).counts)
    # merge returns a fresh matrix and leaves the operands alone.
    assert ab.counts is not a.counts
    before = a.counts.copy()
    a.merge(b)
    assert np.array_equal(a.counts, before)
    with pytest.raises(ConfigurationError):
        a.merge(ConfusionMatrix(5))


def test_ignored_pixels_are_skipped():
    gt = np.array([[0, 255], [255, 1]], dtype=np.int64)
    pred = np.array([[0, 1], [0, 1]], dtype=np.int64)
    cm = ConfusionMatrix(2).update_labels(pred, gt)
    assert cm.total() == 2
    assert cm.counts[0, 0] == 1
    assert cm.counts[1, 1] == 1


def test_total_counts_non_ignored_pixels():
    pred, gt = _random_case(23, shape=(3, 7, 7))
    cm = ConfusionMatrix(4).update_labels(pred, gt)
    assert cm.total() == int((gt != 255).sum())


def test_argmax_tie_takes_lowest_class():
    logits = np.zeros((1, 3, 2, 2), dtype=np.float32)
    logits[0, 1] = 1.0
    logits[0, 2] = 1.0
    gt = np.ones((1, 2, 2), dtype=np.int64)
    cm = ConfusionMatrix(3).update_logits(Tensor(logits), gt)
    # Classes 1 and 2 share the maximum; every pixel must land on class 1.
    assert cm.counts[1, 1] == 4
    assert cm.counts[1, 2] == 0


def test_no_class_present_rejected():
    cm = ConfusionMatrix(3)
    with pytest.raises(NumericError):
        cm.miou()
    gt = np.full((2, 2), 255, dtype=np.int64)
    cm.update_labels(np.zeros((2, 2), dtype=np.int64), gt)
    with pytest.raises(NumericError):
        cm.miou()


def test_absent_class_is_excluded_not_zeroed():
    gt = np.zeros((2, 2), dtype=np.int64)
    pred = np.zeros((2, 2), dtype=np.int64)
    cm = ConfusionMatrix(3).update_labels(pred, gt)
    iou, mean = cm.miou()
    assert iou[0] == 1.0
    assert np.isnan(iou[1]) and np.isnan(iou[2])
    assert mean == 1.0


def test_matches_scalar_reference():
    pred, gt = _random_case(29, k=4, shape=(2, 6, 6))
    cm = ConfusionMatrix(4).update_labels(pred, gt)
    iou, mean = cm.miou()
    ref_iou, ref_mean = miou_ref(pred, gt, 4)
    for k in range(4):
        if ref_iou[k] is None:
            assert np.isnan(iou[k])
        else:
            assert iou[k] == pytest.approx(ref_iou[k], abs=1e-12)
    assert mean == pytest.approx(ref_mean, abs=1e-12)


def test_input_validation():
    cm = ConfusionMatrix(3)
    with pytest.raises(ShapeError):
        cm.update_labels(np.zeros((2, 2), dtype=np.int64), np.zeros((2, 3), dtype=np.int64))
    with pytest.raises(ShapeError):
        cm.update_labels(np.zeros((2, 2), dtype=np.float32), np.zeros((2, 2), dtype=np.int64))
    with pytest.raises(ConfigurationError):
        cm.update_labels(np.full((2, 2), 3, dtype=np.int64), np.zeros((2, 2), dtype=np.int64))
    with pytest.raises(ConfigurationError):
        cm.update_labels(np.zeros((2, 2), dtype=np.int64), np.full((2, 2), 9, dtype=np.int64))
    with pytest.raises(ConfigurationError):
        ConfusionMatrix(0)
    with pytest.raises(ShapeError):
        cm.update_logits(Tensor(np.zeros((1, 2, 2, 2), dtype=np.float32)),
                         np.zeros((1, 2, 2), dtype=np.int64))


def test_counts_view_is_read_only():
    cm = ConfusionMatrix(2)
    with pytest.raises(ValueError):
        cm.counts[0, 0] = 5


def test_class_name_table():
    assert len(CLASS_NAMES_19) == 19
    assert class_names(19) == CLASS_NAMES_19
    assert CLASS_NAMES_19[6] == "traffic_light"
    assert CLASS_NAMES_19[7] == "traffic_sign"
    fallback = class_names(3)
    assert fallback == ("class00", "class01", "class02")


def test_report_and_machine_lines():
    gt = np.zeros((4, 8), dtype=np.int64)
    gt[:, 4:] = 1
    pred = np.zeros((4, 8), dtype=np.int64)
    cm = ConfusionMatrix(2).update_labels(pred, gt)
    text = cm.report(("left", "right"))
    assert "left" in text and "right" in text
    lines = cm.machine_lines(("left", "right"))
    assert "miou=0.250000" in lines
    assert "iou.left=0.500000" in lines
    assert "iou.right=0.000000" in lines
