import csv

import pytest
import torch
from torch import nn

from spatrain.data import load_split
from spatrain.net import NetConfig, build_net
from spatrain.train import EarlyStopper, TrainConfig, train

from conftest import make_container


def test_early_stopper_counts_exactly():
    s = EarlyStopper(patience=3)
    assert not s.update(1.0)   # improvement
    assert not s.update(1.0)   # stale 1 (not strictly better)
    assert not s.update(1.1)   # stale 2
    assert not s.update(0.5)   # improvement resets
    assert not s.update(0.6)
    assert not s.update(0.6)
    assert s.update(0.6)       # third consecutive non-improvement -> stop


class _Constant(nn.Module):
    """Output independent of the weights: the loss can never improve."""

    def __init__(self):
        super().__init__()
        self.p = nn.Parameter(torch.zeros(1))

    def forward(self, x):
        return torch.sigmoid(x[:, :2] + 0.0 * self.p)


def _toy_data(n=8, shape=(8, 8)):
    g = torch.Generator().manual_seed(0)
    x = torch.rand(n, 2, *shape, generator=g)
    seg = torch.zeros(n, 1, *shape)
    seg[:, :, 3:5, 3:5] = 1.0
    return x, seg, 0.5 * seg


def test_early_stop_after_patience_constant_loss():
    cfg = TrainConfig(batch_size=4, max_epochs=100, early_stop_patience=5)
    result = train(_Constant(), _toy_data(), _toy_data(), cfg)
    # epoch 1 improves on +inf; the next `patience` epochs are stale
    assert result.n_epochs == 1 + cfg.early_stop_patience
    assert result.best_epoch == 1


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(early_stop_patience=0)
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=10, early_stop_patience=10)
    with pytest.raises(ValueError):
        TrainConfig(seg_loss_kind="other")


def test_empty_training_split_rejected():
    x, seg, so2 = _toy_data(0)
    with pytest.raises(ValueError):
        train(_Constant(), (x, seg, so2), None, TrainConfig())


def test_training_is_deterministic(tmp_path):
    data = _toy_data()
    cfg = TrainConfig(batch_size=4, max_epochs=3, early_stop_patience=2, seed=7)
    losses = []
    for _ in range(2):
        torch.manual_seed(cfg.seed)
        model = build_net(NetConfig(depth=1, base_channels=2, image_size=(8, 8)))
        result = train(model, data, None, cfg)
        losses.append([row[1] for row in result.history])
    assert losses[0] == losses[1]


def test_single_batch_overfit(tmp_path):
    root = make_container(tmp_path / "ds", n_samples=32, shape=(32, 32), seed=5,
                          splits=("train",))
    data = load_split(root, "train")
    torch.manual_seed(0)
    model = build_net(NetConfig(depth=2, base_channels=8, image_size=(32, 32)))
    cfg = TrainConfig(learning_rate=0.005, batch_size=32, max_epochs=200,
                      early_stop_patience=199, seed=0)
    result = train(model, data, None, cfg, tmp_path / "train_log.csv")
    assert result.best_val_loss < 0.02

    with open(tmp_path / "train_log.csv") as fp:
        rows = list(csv.reader(fp))
    assert rows[0] == ["epoch", "train_loss", "val_loss"]
    assert len(rows) == result.n_epochs + 1
    assert [int(r[0]) for r in rows[1:]] == list(range(1, result.n_epochs + 1))


def test_best_weights_restored():
    data = _toy_data()
    torch.manual_seed(0)
    model = build_net(NetConfig(depth=1, base_channels=2, image_size=(8, 8)))
    cfg = TrainConfig(batch_size=8, max_epochs=10, early_stop_patience=9,
                      learning_rate=0.5)  # large lr so loss fluctuates
    result = train(model, data, data, cfg)
    x, seg, so2 = data
    model.eval()
    with torch.no_grad():
        out = model(x)
    from spatrain.losses import batch_loss
    assert float(batch_loss(out, seg, so2)) == pytest.approx(result.best_val_loss,
                                                             rel=1e-6)
