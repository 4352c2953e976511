"""Losses and evaluation statistics.

The hybrid loss is the equally weighted sum of a segmentation loss
(Dice, or plain MSE) and the sO2 mean squared error restricted to the
ground-truth vessel mask; predictions outside the mask cannot change it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SegStats",
    "EvalReport",
    "binarize",
    "dice_loss",
    "mse_in_mask",
    "hybrid_loss",
    "plain_mse_loss",
    "final_so2",
    "seg_stats",
]

DICE_SMOOTHING = 1e-7


def binarize(seg_prob: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Strictly-greater thresholding: a pixel at exactly 0.5 maps to 0."""
    return (np.asarray(seg_prob) > threshold).astype(np.uint8)


def dice_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """1 - Dice overlap, with a small smoothing term for empty masks."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    inter = float((pred * gt).sum())
    denom = float(pred.sum() + gt.sum())
    return 1.0 - (2.0 * inter + DICE_SMOOTHING) / (denom + DICE_SMOOTHING)


def mse_in_mask(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared error over mask pixels only."""
    mask = np.asarray(mask) > 0
    if not mask.any():
        raise ValueError("empty mask: masked MSE undefined")
    d = np.asarray(pred, dtype=np.float64)[mask] - np.asarray(gt, dtype=np.float64)[mask]
    return float(np.mean(d * d))


def plain_mse_loss(so2_pred: np.ndarray, so2_gt: np.ndarray) -> float:
    """Full field-of-view mean squared error."""
    d = np.asarray(so2_pred, dtype=np.float64) - np.asarray(so2_gt, dtype=np.float64)
    return float(np.mean(d * d))


def hybrid_loss(
    seg_pred: np.ndarray,
    seg_gt: np.ndarray,
    so2_pred: np.ndarray,
    so2_gt: np.ndarray,
    seg_loss_kind: str = "dice",
) -> float:
    """0.5 * SegLoss + 0.5 * MSE of sO2 within the ground-truth mask.

    Masking the sO2 term on seg_gt is the point: sO2 errors in background
    tissue do not contribute, so the estimator concentrates on vessels.
    """
    if seg_loss_kind == "dice":
        seg_term = dice_loss(seg_pred, seg_gt)
    elif seg_loss_kind == "mse":
        seg_term = plain_mse_loss(seg_pred, seg_gt)
    else:
        raise ValueError(f"unknown seg_loss_kind: {seg_loss_kind!r}")
    return 0.5 * seg_term + 0.5 * mse_in_mask(so2_pred, so2_gt, seg_gt)


def final_so2(seg_bin: np.ndarray, so2_intermediate: np.ndarray) -> np.ndarray:
    """Final sO2 image: elementwise product of segmentation and sO2."""
    return np.asarray(seg_bin, dtype=np.float64) * np.asarray(so2_intermediate, dtype=np.float64)


@dataclass(frozen=True)
class SegStats:
    tp: int
    tn: int
    fp: int
    fn: int
    fpr: float
    fnr: float
    accuracy: float
    degenerate: bool = False  # gt lacked a positive or a negative pixel


def seg_stats(pred_bin: np.ndarray, gt_bin: np.ndarray) -> SegStats:
    """Pixelwise confusion counts and rates.

    If gt has no positives (or no negatives), the undefined rate is
    reported as 0 and the stats are flagged degenerate.
    """
    pred = np.asarray(pred_bin) > 0
    gt = np.asarray(gt_bin) > 0
    tp = int((pred & gt).sum())
    tn = int((~pred & ~gt).sum())
    fp = int((pred & ~gt).sum())
    fn = int((~pred & gt).sum())
    pos, neg = tp + fn, tn + fp
    degenerate = pos == 0 or neg == 0
    fpr = fp / neg if neg else 0.0
    fnr = fn / pos if pos else 0.0
    return SegStats(tp, tn, fp, fn, fpr, fnr, (tp + tn) / pred.size, degenerate)


@dataclass
class SampleMetrics:
    sample_id: str
    dice_loss: float
    fpr: float
    fnr: float
    accuracy: float
    so2_mse_in_gt_mask: float
    hybrid_loss: float


_METRIC_FIELDS = (
    "dice_loss", "fpr", "fnr", "accuracy", "so2_mse_in_gt_mask", "hybrid_loss",
)


@dataclass
class EvalReport:
    samples: list[SampleMetrics] = field(default_factory=list)

    def aggregate(self) -> dict[str, tuple[float, float]]:
        """Per-metric (mean, standard deviation) over samples."""
        out = {}
        for name in _METRIC_FIELDS:
            vals = [getattr(s, name) for s in self.samples]
            mean = sum(vals) / len(vals)
            var = sum((v - mean) ** 2 for v in vals) / len(vals)
            out[name] = (mean, math.sqrt(var))
        return out

    def to_csv(self, fp: io.TextIOBase) -> None:
        w = csv.writer(fp)
        w.writerow(("sample_id",) + _METRIC_FIELDS)
        for s in self.samples:
            w.writerow([s.sample_id] + [f"{getattr(s, n):.9g}" for n in _METRIC_FIELDS])
        agg = self.aggregate()
        w.writerow(["mean"] + [f"{agg[n][0]:.9g}" for n in _METRIC_FIELDS])
        w.writerow(["std"] + [f"{agg[n][1]:.9g}" for n in _METRIC_FIELDS])
