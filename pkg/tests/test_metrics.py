import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from spaox.metrics import (
    DICE_SMOOTHING,
    EvalReport,
    SampleMetrics,
    binarize,
    dice_loss,
    final_so2,
    hybrid_loss,
    mse_in_mask,
    plain_mse_loss,
    seg_stats,
)


def brute_force_counts(pred, gt):
    """Per-pixel python loop: the counting oracle."""
    tp = tn = fp = fn = 0
    for p, g in zip(pred.ravel(), gt.ravel()):
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif not p and g:
            fn += 1
        else:
            tn += 1
    return tp, tn, fp, fn


def brute_force_dice_loss(pred, gt):
    inter = sum(
        1 for p, g in zip(pred.ravel(), gt.ravel()) if p and g
    )
    total = int(pred.sum()) + int(gt.sum())
    return 1.0 - (2.0 * inter + DICE_SMOOTHING) / (total + DICE_SMOOTHING)


def test_binarize_strictly_greater():
    x = np.array([0.0, 0.5, 0.5000001, 1.0])
    assert binarize(x).tolist() == [0, 0, 1, 1]
    assert binarize(x).dtype == np.uint8


def test_counting_oracle_equivalence():
    rng = np.random.default_rng(0)
    for _ in range(200):
        pred = (rng.random((16, 16)) > 0.5).astype(np.uint8)
        gt = (rng.random((16, 16)) > 0.5).astype(np.uint8)
        tp, tn, fp, fn = brute_force_counts(pred, gt)
        s = seg_stats(pred, gt)
        assert (s.tp, s.tn, s.fp, s.fn) == (tp, tn, fp, fn)
        if not s.degenerate:
            assert abs(s.fpr - fp / (fp + tn)) <= 1e-12
            assert abs(s.fnr - fn / (fn + tp)) <= 1e-12
        assert abs(s.accuracy - (tp + tn) / 256) <= 1e-12
        assert abs(dice_loss(pred, gt) - brute_force_dice_loss(pred, gt)) <= 1e-12


def test_seg_stats_degenerate_flags():
    ones = np.ones((4, 4), dtype=np.uint8)
    zeros = np.zeros((4, 4), dtype=np.uint8)
    s = seg_stats(zeros, ones)  # gt all positive: FPR undefined
    assert s.degenerate and s.fpr == 0.0 and s.fnr == 1.0
    s = seg_stats(ones, zeros)  # gt all negative: FNR undefined
    assert s.degenerate and s.fnr == 0.0 and s.fpr == 1.0
    s = seg_stats(ones, ones)
    assert s.degenerate and s.accuracy == 1.0


def test_dice_loss_limits():
    a = np.ones((8, 8), dtype=np.uint8)
    assert dice_loss(a, a) == pytest.approx(0.0, abs=1e-9)
    z = np.zeros((8, 8), dtype=np.uint8)
    assert dice_loss(z, z) == 0.0  # smoothing keeps empty/empty perfect
    assert dice_loss(a, z) == pytest.approx(1.0, abs=1e-7)


def test_mse_in_mask_vs_loop():
    rng = np.random.default_rng(1)
    pred = rng.random((16, 16))
    gt = rng.random((16, 16))
    mask = (rng.random((16, 16)) > 0.6).astype(np.uint8)
    acc = [
        (p - g) ** 2
        for p, g, m in zip(pred.ravel(), gt.ravel(), mask.ravel())
        if m
    ]
    assert mse_in_mask(pred, gt, mask) == pytest.approx(
        sum(acc) / len(acc), rel=1e-12
    )


def test_mse_in_mask_empty_raises():
    with pytest.raises(ValueError):
        mse_in_mask(np.ones((4, 4)), np.ones((4, 4)), np.zeros((4, 4)))


def test_hybrid_loss_is_half_and_half():
    rng = np.random.default_rng(2)
    seg_pred = (rng.random((16, 16)) > 0.5).astype(np.uint8)
    seg_gt = (rng.random((16, 16)) > 0.5).astype(np.uint8)
    so2_pred = rng.random((16, 16))
    so2_gt = rng.random((16, 16))
    expected = 0.5 * dice_loss(seg_pred, seg_gt) + 0.5 * mse_in_mask(
        so2_pred, so2_gt, seg_gt
    )
    assert hybrid_loss(seg_pred, seg_gt, so2_pred, so2_gt) == pytest.approx(
        expected, rel=1e-15
    )
    expected_mse = 0.5 * plain_mse_loss(seg_pred, seg_gt) + 0.5 * mse_in_mask(
        so2_pred, so2_gt, seg_gt
    )
    assert hybrid_loss(
        seg_pred, seg_gt, so2_pred, so2_gt, seg_loss_kind="mse"
    ) == pytest.approx(expected_mse, rel=1e-15)
    with pytest.raises(ValueError):
        hybrid_loss(seg_pred, seg_gt, so2_pred, so2_gt, seg_loss_kind="bce")


def test_hybrid_loss_ignores_background_exactly():
    rng = np.random.default_rng(3)
    seg_pred = (rng.random((16, 16)) > 0.5).astype(np.uint8)
    seg_gt = np.zeros((16, 16), dtype=np.uint8)
    seg_gt[5:10, 5:10] = 1
    so2_pred = rng.random((16, 16))
    so2_gt = rng.random((16, 16))
    base = hybrid_loss(seg_pred, seg_gt, so2_pred, so2_gt)
    perturbed = so2_pred.copy()
    perturbed[seg_gt == 0] += rng.random((16, 16))[seg_gt == 0] * 100.0
    assert hybrid_loss(seg_pred, seg_gt, perturbed, so2_gt) - base == 0.0


@given(
    so2=hnp.arrays(np.float64, (8, 8), elements=st.floats(0, 1)),
    seg=hnp.arrays(np.uint8, (8, 8), elements=st.integers(0, 1)),
)
@settings(max_examples=100, deadline=None)
def test_final_so2_properties(so2, seg):
    out = final_so2(seg, so2)
    assert np.all(out[seg == 0] == 0.0)
    assert np.array_equal(out[seg == 1], so2[seg == 1])


@given(
    pred=hnp.arrays(np.uint8, (8, 8), elements=st.integers(0, 1)),
    gt=hnp.arrays(np.uint8, (8, 8), elements=st.integers(0, 1)),
)
@settings(max_examples=100, deadline=None)
def test_dice_loss_bounds_and_symmetry(pred, gt):
    v = dice_loss(pred, gt)
    assert 0.0 <= v <= 1.0
    assert dice_loss(gt, pred) == pytest.approx(v, rel=1e-12)


def test_eval_report_aggregate_and_csv():
    r = EvalReport()
    for i, (d, mse) in enumerate([(0.1, 0.01), (0.3, 0.03)]):
        r.samples.append(
            SampleMetrics(
                sample_id=f"s{i}", dice_loss=d, fpr=0.0, fnr=0.0,
                accuracy=1.0 - d, so2_mse_in_gt_mask=mse,
                hybrid_loss=0.5 * d + 0.5 * mse,
            )
        )
    agg = r.aggregate()
    assert agg["dice_loss"][0] == pytest.approx(0.2)
    assert agg["dice_loss"][1] == pytest.approx(0.1)  # population std
    buf = io.StringIO()
    r.to_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0].startswith("sample_id,dice_loss,")
    assert len(lines) == 5  # header + 2 samples + mean + std
    assert lines[-2].startswith("mean,") and lines[-1].startswith("std,")
