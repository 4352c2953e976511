"""Encoder-decoder segmentation/regression network.

A standard U-Net: double-conv blocks, max-pool contraction, transposed-
convolution expansion with skip connections. Every convolution is
followed by BatchNorm then ELU; dropout precedes every convolution
except the very first; a 1x1 convolution with a sigmoid head produces
per-pixel outputs in (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class NetConfig:
    depth: int = 4  # encoder levels (pooling steps)
    base_channels: int = 32
    dropout_rate: float = 0.1
    in_channels: int = 2  # one image per wavelength
    out_channels: int = 2  # (seg_prob, so2); 1 = so2 only
    image_size: tuple[int, int] = (128, 128)

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.base_channels < 1:
            raise ValueError("base_channels must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.out_channels not in (1, 2):
            raise ValueError("out_channels must be 1 (sO2 only) or 2 (seg + sO2)")
        step = 2 ** self.depth
        h, w = self.image_size
        if h % step or w % step or h < 2 * step or w < 2 * step:
            raise ValueError(
                f"image size {self.image_size} incompatible with depth {self.depth}"
            )


def _conv(in_ch: int, out_ch: int, dropout: float, first: bool) -> list[nn.Module]:
    layers: list[nn.Module] = []
    if not first and dropout > 0:
        layers.append(nn.Dropout2d(dropout))
    layers += [
        nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=1, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.ELU(inplace=True),
    ]
    return layers


class _DoubleConv(nn.Sequential):
    def __init__(self, in_ch: int, out_ch: int, dropout: float, first: bool = False):
        super().__init__(
            *_conv(in_ch, out_ch, dropout, first),
            *_conv(out_ch, out_ch, dropout, first=False),
        )


class UNet(nn.Module):
    def __init__(self, config: NetConfig | None = None):
        super().__init__()
        cfg = config or NetConfig()
        self.config = cfg
        ch = [cfg.base_channels * 2 ** i for i in range(cfg.depth + 1)]

        self.encoders = nn.ModuleList()
        prev = cfg.in_channels
        for i, c in enumerate(ch[:-1]):
            self.encoders.append(_DoubleConv(prev, c, cfg.dropout_rate, first=(i == 0)))
            prev = c
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _DoubleConv(ch[-2], ch[-1], cfg.dropout_rate)

        self.upsamplers = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for c in reversed(ch[:-1]):
            self.upsamplers.append(nn.ConvTranspose2d(c * 2, c, kernel_size=2, stride=2))
            self.decoders.append(_DoubleConv(c * 2, c, cfg.dropout_rate))

        head: list[nn.Module] = []
        if cfg.dropout_rate > 0:
            head.append(nn.Dropout2d(cfg.dropout_rate))
        head += [nn.Conv2d(ch[0], cfg.out_channels, kernel_size=1), nn.Sigmoid()]
        self.head = nn.Sequential(*head)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = self.config.image_size
        if x.shape[-2:] != (h, w):
            raise ValueError(f"expected {h}x{w} input, got {tuple(x.shape[-2:])}")
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, dec, skip in zip(self.upsamplers, self.decoders, reversed(skips)):
            x = up(x)
            x = dec(torch.cat((skip, x), dim=1))
        return self.head(x)


def build_net(config: NetConfig | None = None) -> UNet:
    return UNet(config)
