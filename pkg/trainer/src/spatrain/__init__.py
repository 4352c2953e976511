"""U-Net trainer for simulated spectroscopic photoacoustic datasets."""

from .data import ContainerError, Sample, SpaDataset, load_split, to_tensors
from .losses import batch_loss, dice_loss, hybrid_loss, mse_in_mask, plain_mse_loss
from .net import NetConfig, UNet, build_net
from .predict import export_predictions, load_checkpoint, save_checkpoint
from .train import EarlyStopper, TrainConfig, TrainResult, train

__all__ = [
    "ContainerError",
    "EarlyStopper",
    "NetConfig",
    "Sample",
    "SpaDataset",
    "TrainConfig",
    "TrainResult",
    "UNet",
    "batch_loss",
    "build_net",
    "dice_loss",
    "export_predictions",
    "hybrid_loss",
    "load_checkpoint",
    "load_split",
    "mse_in_mask",
    "plain_mse_loss",
    "save_checkpoint",
    "to_tensors",
    "train",
]
