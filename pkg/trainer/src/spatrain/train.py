"""Training loop: Adam, early stopping on validation loss, best-weight
restore, and a deterministic CSV training curve."""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass
from pathlib import Path

import torch

from .losses import batch_loss


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0005
    batch_size: int = 32
    max_epochs: int = 1000
    early_stop_patience: int = 50
    seg_loss_kind: str = "dice"
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.early_stop_patience < self.max_epochs:
            raise ValueError("early_stop_patience must be in (0, max_epochs)")
        if self.seg_loss_kind not in ("dice", "mse"):
            raise ValueError("seg_loss_kind must be 'dice' or 'mse'")


class EarlyStopper:
    """Stop after `patience` consecutive epochs without improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.stale = 0

    def update(self, val_loss: float) -> bool:
        """Record an epoch's validation loss; True means stop now."""
        if val_loss < self.best:
            self.best = val_loss
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


@dataclass
class TrainResult:
    best_val_loss: float
    best_epoch: int
    n_epochs: int
    history: list[tuple[int, float, float]]  # (epoch, train_loss, val_loss)


def _epoch_loss(model, data, config, batch_size) -> float:
    x, seg, so2 = data
    total = 0.0
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            out = model(x[i:i + batch_size])
            loss = batch_loss(out, seg[i:i + batch_size], so2[i:i + batch_size],
                              config.seg_loss_kind)
            total += float(loss) * (min(i + batch_size, len(x)) - i)
    return total / len(x)


def train(
    model: torch.nn.Module,
    train_data: tuple[torch.Tensor, torch.Tensor, torch.Tensor],
    val_data: tuple[torch.Tensor, torch.Tensor, torch.Tensor] | None,
    config: TrainConfig | None = None,
    log_path: str | Path | None = None,
) -> TrainResult:
    """Optimize `model` in place; the best-validation weights are restored
    on return. With no validation data the train loss drives early
    stopping and checkpoint selection (single-batch overfit runs)."""
    config = config or TrainConfig()
    x, seg, so2 = train_data
    if len(x) == 0:
        raise ValueError("empty training split")

    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    stopper = EarlyStopper(config.early_stop_patience)
    best_state = copy.deepcopy(model.state_dict())
    best_epoch = 0
    history: list[tuple[int, float, float]] = []

    for epoch in range(1, config.max_epochs + 1):
        model.train()
        perm = torch.randperm(len(x), generator=gen)
        total = 0.0
        for i in range(0, len(perm), config.batch_size):
            idx = perm[i:i + config.batch_size]
            opt.zero_grad()
            out = model(x[idx])
            loss = batch_loss(out, seg[idx], so2[idx], config.seg_loss_kind)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        train_loss = total / len(x)

        model.eval()
        val_loss = (
            _epoch_loss(model, val_data, config, config.batch_size)
            if val_data is not None
            else train_loss
        )
        history.append((epoch, train_loss, val_loss))

        if val_loss < stopper.best:
            best_state = copy.deepcopy(model.state_dict())
            best_epoch = epoch
        if stopper.update(val_loss):
            break

    model.load_state_dict(best_state)
    model.eval()
    if log_path is not None:
        with open(log_path, "w", newline="") as fp:
            w = csv.writer(fp)
            w.writerow(["epoch", "train_loss", "val_loss"])
            for row in history:
                w.writerow([row[0], f"{row[1]:.9g}", f"{row[2]:.9g}"])
    return TrainResult(stopper.best, best_epoch, len(history), history)
