"""Training losses: Dice, masked sO2 MSE, and their hybrid combination.

Numerically the same definitions as the evaluation metrics used to score
predictions (smoothed Dice with epsilon 1e-7; sO2 MSE averaged over
ground-truth vessel pixels only). The masked MSE multiplies the residual
by the mask before squaring, so its gradient with respect to predictions
outside the mask is exactly zero — background sO2 cannot influence
training.
"""

from __future__ import annotations

import torch

DICE_SMOOTHING = 1e-7


def dice_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    inter = (pred * gt).sum()
    denom = pred.sum() + gt.sum()
    return 1.0 - (2.0 * inter + DICE_SMOOTHING) / (denom + DICE_SMOOTHING)


def mse_in_mask(pred: torch.Tensor, gt: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    mask = (mask > 0).to(pred.dtype)
    n = mask.sum()
    if n.item() == 0:
        raise ValueError("empty mask: masked MSE undefined")
    d = (pred - gt) * mask
    return (d * d).sum() / n


def plain_mse_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    d = pred - gt
    return (d * d).mean()


def hybrid_loss(
    seg_pred: torch.Tensor,
    seg_gt: torch.Tensor,
    so2_pred: torch.Tensor,
    so2_gt: torch.Tensor,
    seg_loss_kind: str = "dice",
) -> torch.Tensor:
    if seg_loss_kind == "dice":
        seg_term = dice_loss(seg_pred, seg_gt)
    elif seg_loss_kind == "mse":
        seg_term = plain_mse_loss(seg_pred, seg_gt)
    else:
        raise ValueError(f"unknown seg_loss_kind: {seg_loss_kind!r}")
    return 0.5 * seg_term + 0.5 * mse_in_mask(so2_pred, so2_gt, seg_gt)


def batch_loss(
    output: torch.Tensor,
    seg_gt: torch.Tensor,
    so2_gt: torch.Tensor,
    seg_loss_kind: str = "dice",
) -> torch.Tensor:
    """Loss for a model output batch.

    Two output channels: hybrid loss with channel 0 as segmentation
    probability and channel 1 as sO2. One channel: plain full-image MSE
    against the ground-truth sO2 map.
    """
    if output.shape[1] == 2:
        return hybrid_loss(
            output[:, 0:1], seg_gt, output[:, 1:2], so2_gt, seg_loss_kind
        )
    return plain_mse_loss(output[:, 0:1], so2_gt)
