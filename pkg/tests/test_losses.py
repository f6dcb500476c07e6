"""Training criterion checks: closed-form values and scalar reference
comparisons, plus the linear structure of the combined objective."""

import math

import numpy as np
import pytest

from drbanet import (
    ConfigurationError,
    ForwardOutputs,
    LossWeights,
    NumericError,
    ShapeError,
    Tensor,
    bce_loss,
    cross_entropy,
    dice_loss,
    total_loss,
)
from oracles import bce_ref, cross_entropy_ref, dice_ref


def _outputs(seed=5, n=1, k=3, h=4, w=4):
    rng = np.random.default_rng(seed)
    seg = Tensor(rng.uniform(-3, 3, size=(n, k, h, w)).astype(np.float32))
    aux = Tensor(rng.uniform(-3, 3, size=(n, k, h, w)).astype(np.float32))
    bnd = Tensor(rng.uniform(-3, 3, size=(n, 1, h, w)).astype(np.float32))
    labels = rng.integers(0, k, size=(n, h, w))
    gt = rng.integers(0, 2, size=(n, h, w)).astype(np.float64)
    return ForwardOutputs(seg, aux, bnd), labels, gt


# ---------------------------------------------------------------------------
# cross entropy
# ---------------------------------------------------------------------------


def test_uniform_logits_give_log_k():
    logits = Tensor(np.zeros((1, 19, 4, 4), dtype=np.float32))
    labels = np.zeros((4, 4), dtype=np.int64)
    assert cross_entropy(logits, labels) == pytest.approx(math.log(19.0), abs=1e-12)


def test_confident_logits_drive_loss_to_zero():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 5, size=(2, 3, 3))
    logits = np.zeros((2, 5, 3, 3), dtype=np.float32)
    for i in range(2):
        for y in range(3):
            for x in range(3):
                logits[i, labels[i, y, x], y, x] = 1000.0
    assert cross_entropy(Tensor(logits), labels) < 1e-6


def test_cross_entropy_matches_reference():
    rng = np.random.default_rng(7)
    logits = rng.uniform(-4, 4, size=(2, 4, 3, 3)).astype(np.float32)
    labels = rng.integers(0, 4, size=(2, 3, 3))
    labels[0, 0, 0] = 255
    labels[1, 2, 1] = 255
    got = cross_entropy(Tensor(logits), labels)
    assert got == pytest.approx(cross_entropy_ref(logits, labels), abs=1e-6)


def test_all_ignored_rejected():
    logits = Tensor(np.zeros((1, 3, 2, 2), dtype=np.float32))
    labels = np.full((1, 2, 2), 255, dtype=np.int64)
    with pytest.raises(NumericError):
        cross_entropy(logits, labels)


def test_per_pixel_shift_invariance():
    rng = np.random.default_rng(13)
    logits = rng.uniform(-4, 4, size=(2, 6, 5, 5)).astype(np.float32)
    labels = rng.integers(0, 6, size=(2, 5, 5))
    base = cross_entropy(Tensor(logits), labels)
    shift = rng.uniform(-50, 50, size=(2, 1, 5, 5)).astype(np.float64)
    shifted = (logits.astype(np.float64) + shift).astype(np.float32)
    # Softmax removes any constant added uniformly across channels, so the
    # loss may move only by float32 rounding of the shifted logits.
    assert cross_entropy(Tensor(shifted), labels) == pytest.approx(base, abs=1e-4)


def test_bad_labels_rejected():
    logits = Tensor(np.zeros((1, 4, 2, 2), dtype=np.float32))
    good = np.zeros((1, 2, 2), dtype=np.int64)
    with pytest.raises(ConfigurationError):
        cross_entropy(logits, np.full((1, 2, 2), 4, dtype=np.int64))
    with pytest.raises(ConfigurationError):
        cross_entropy(logits, np.full((1, 2, 2), -1, dtype=np.int64))
    with pytest.raises(ShapeError):
        cross_entropy(logits, good.astype(np.float32))
    with pytest.raises(ShapeError):
        cross_entropy(logits, np.zeros((1, 3, 2), dtype=np.int64))


# ---------------------------------------------------------------------------
# boundary losses
# ---------------------------------------------------------------------------


def test_zero_logits_give_log_two():
    logits = Tensor(np.zeros((1, 1, 4, 4), dtype=np.float32))
    gt = np.random.default_rng(1).integers(0, 2, size=(1, 4, 4)).astype(np.float64)
    assert bce_loss(logits, gt) == pytest.approx(math.log(2.0), abs=1e-12)


def test_saturated_logits_vanish():
    ones = np.ones((1, 1, 3, 3), dtype=np.float32)
    gt_one = np.ones((1, 3, 3), dtype=np.float64)
    gt_zero = np.zeros((1, 3, 3), dtype=np.float64)
    assert bce_loss(Tensor(20.0 * ones), gt_one) < 1e-8
    assert bce_loss(Tensor(-20.0 * ones), gt_zero) < 1e-8


def test_bce_matches_reference():
    rng = np.random.default_rng(17)
    logits = rng.uniform(-6, 6, size=(2, 1, 4, 4)).astype(np.float32)
    gt = rng.integers(0, 2, size=(2, 4, 4)).astype(np.float64)
    assert bce_loss(Tensor(logits), gt) == pytest.approx(bce_ref(logits, gt), abs=1e-9)


def test_bce_label_flip_symmetry():
    rng = np.random.default_rng(19)
    logits = rng.uniform(-8, 8, size=(2, 1, 5, 5)).astype(np.float32)
    gt = rng.integers(0, 2, size=(2, 5, 5)).astype(np.float64)
    assert bce_loss(Tensor(logits), gt) == bce_loss(Tensor(-logits), 1.0 - gt)


def test_dice_perfect_prediction():
    gt = np.random.default_rng(2).integers(0, 2, size=(1, 6, 6)).astype(np.float64)
    logits = np.where(gt[:, None] > 0, 40.0, -40.0).astype(np.float32)
    assert dice_loss(Tensor(logits), gt) == pytest.approx(0.0, abs=1e-12)


def test_dice_total_miss_on_positives():
    gt = np.ones((1, 10, 10), dtype=np.float64)
    logits = np.full((1, 1, 10, 10), -40.0, dtype=np.float32)
    # p ~ 0 everywhere: 1 - 1 / (100 + 1).
    assert dice_loss(Tensor(logits), gt) == pytest.approx(100.0 / 101.0, abs=1e-9)


def test_dice_matches_reference():
    rng = np.random.default_rng(29)
    logits = rng.uniform(-6, 6, size=(3, 1, 4, 5)).astype(np.float32)
    gt = rng.integers(0, 2, size=(3, 4, 5)).astype(np.float64)
    assert dice_loss(Tensor(logits), gt) == pytest.approx(
        dice_ref(logits, gt), abs=1e-9
    )


def test_dice_range():
    rng = np.random.default_rng(37)
    for _ in range(25):
        logits = rng.uniform(-30, 30, size=(2, 1, 4, 4)).astype(np.float32)
        gt = rng.integers(0, 2, size=(2, 4, 4)).astype(np.float64)
        val = dice_loss(Tensor(logits), gt)
        assert 0.0 <= val < 1.0


def test_boundary_target_validation():
    logits = Tensor(np.zeros((1, 2, 3, 3), dtype=np.float32))
    with pytest.raises(ShapeError):
        bce_loss(logits, np.zeros((1, 3, 3)))
    single = Tensor(np.zeros((1, 1, 3, 3), dtype=np.float32))
    with pytest.raises(ShapeError):
        bce_loss(single, np.zeros((1, 4, 3)))
    with pytest.raises(ShapeError):
        bce_loss(single, np.full((1, 3, 3), 0.5))


# ---------------------------------------------------------------------------
# combined objective
# ---------------------------------------------------------------------------


def test_zero_weights_reduce_to_segmentation():
    outputs, labels, gt = _outputs()
    breakdown = total_loss(outputs, labels, gt, LossWeights(0.0, 0.0))
    assert breakdown.total == breakdown.seg
    assert breakdown.seg == cross_entropy(outputs.seg_logits, labels)


def test_total_matches_reference_composition():
    outputs, labels, gt = _outputs(seed=41, n=1, k=2, h=2, w=2)
    breakdown = total_loss(outputs, labels, gt)
    expected = (
        cross_entropy_ref(outputs.seg_logits.data, labels)
        + 0.2 * cross_entropy_ref(outputs.aux_seg_logits.data, labels)
        + 0.1 * (bce_ref(outputs.boundary_logits.data, gt)
                 + dice_ref(outputs.boundary_logits.data, gt))
    )
    assert breakdown.total == pytest.approx(expected, abs=1e-6)
    assert breakdown.bound == pytest.approx(breakdown.bce + breakdown.dice, abs=0)


def test_total_is_affine_in_the_weights():
    outputs, labels, gt = _outputs(seed=43, n=2, k=4, h=5, w=5)
    low = total_loss(outputs, labels, gt, LossWeights(0.2, 0.1))
    hi1 = total_loss(outputs, labels, gt, LossWeights(0.4, 0.1))
    hi2 = total_loss(outputs, labels, gt, LossWeights(0.2, 0.3))
    assert hi1.total - low.total == pytest.approx(0.2 * low.aux, abs=1e-7)
    assert hi2.total - low.total == pytest.approx(
        0.2 * (low.bce + low.dice), abs=1e-7
    )


def test_negative_weights_rejected():
    with pytest.raises(ConfigurationError):
        LossWeights(-0.1, 0.1)
    with pytest.raises(ConfigurationError):
        LossWeights(0.2, -1.0)
