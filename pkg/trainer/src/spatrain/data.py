"""Reader for the sPA dataset container format.

Layout: ``<root>/manifest.json`` plus ``<root>/samples/<id>.f32x4``
blobs holding four little-endian float32 images in fixed order
(img700, img850, gt_seg, gt_so2), CRC32-checked against the manifest.
This module depends only on the on-disk format, not on the package that
produced it.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

FORMAT_VERSION = 1


class ContainerError(Exception):
    """Malformed or missing dataset container contents."""


@dataclass(frozen=True)
class Sample:
    id: str
    img700: np.ndarray
    img850: np.ndarray
    gt_seg: np.ndarray
    gt_so2: np.ndarray


class SpaDataset:
    """Read-only view of a dataset directory."""

    def __init__(self, root):
        self.root = Path(root)
        path = self.root / "manifest.json"
        if not path.exists():
            raise ContainerError(f"no manifest at {path}")
        self.manifest = json.loads(path.read_text(encoding="utf-8"))
        if self.manifest.get("format_version") != FORMAT_VERSION:
            raise ContainerError(
                f"unsupported container version {self.manifest.get('format_version')}"
            )
        self.image_shape = tuple(self.manifest["image_shape"])
        self._entries = {s["id"]: s for s in self.manifest["samples"]}

    def ids(self, split: str | None = None) -> list[str]:
        return [
            s["id"]
            for s in self.manifest["samples"]
            if split is None or s.get("split") == split
        ]

    def read(self, sample_id: str) -> Sample:
        entry = self._entries.get(sample_id)
        if entry is None:
            raise ContainerError(f"sample {sample_id!r} not in manifest")
        path = self.root / entry["path"]
        if not path.exists():
            raise ContainerError(f"sample blob missing: {path}")
        blob = path.read_bytes()
        h, w = self.image_shape
        if len(blob) != 4 * h * w * 4:
            raise ContainerError(f"{path}: truncated blob ({len(blob)} bytes)")
        if zlib.crc32(blob) != entry["crc32"]:
            raise ContainerError(f"{path}: CRC32 mismatch")
        arrays = [
            np.frombuffer(blob, dtype="<f4", count=h * w, offset=i * h * w * 4)
            .reshape(h, w)
            .copy()
            for i in range(4)
        ]
        return Sample(sample_id, *arrays)


def to_tensors(samples: list[Sample]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Stack samples into (inputs [N,2,H,W], gt_seg [N,1,H,W], gt_so2 [N,1,H,W])."""
    if not samples:
        raise ValueError("no samples to stack")
    x = torch.from_numpy(np.stack([np.stack((s.img700, s.img850)) for s in samples]))
    seg = torch.from_numpy(np.stack([s.gt_seg[None] for s in samples]))
    so2 = torch.from_numpy(np.stack([s.gt_so2[None] for s in samples]))
    return x.float(), seg.float(), so2.float()


def load_split(root, split: str | None = None) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    ds = SpaDataset(root)
    return to_tensors([ds.read(i) for i in ds.ids(split)])
