"""Inference and prediction export in the evaluator's blob format.

One ``pred/<id>.f32x2`` file per sample: segmentation probability image
then intermediate sO2 image, little-endian float32, row-major. A
one-channel (sO2-only) model exports a constant all-ones segmentation
channel so the shared evaluation path applies unchanged.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .data import SpaDataset, to_tensors


def export_predictions(
    model: torch.nn.Module,
    dataset_root,
    out_dir,
    split: str | None = None,
    batch_size: int = 8,
) -> list[str]:
    """Run the model over a dataset (or one split) and write blobs.

    Returns the exported sample ids.
    """
    ds = SpaDataset(dataset_root)
    ids = ds.ids(split)
    pred_dir = Path(out_dir) / "pred"
    pred_dir.mkdir(parents=True, exist_ok=True)

    model.eval()
    for i in range(0, len(ids), batch_size):
        chunk = ids[i:i + batch_size]
        x, _, _ = to_tensors([ds.read(s) for s in chunk])
        with torch.no_grad():
            out = model(x).numpy()
        for j, sample_id in enumerate(chunk):
            if out.shape[1] == 2:
                seg, so2 = out[j, 0], out[j, 1]
            else:
                seg, so2 = np.ones_like(out[j, 0]), out[j, 0]
            blob = seg.astype("<f4").tobytes() + so2.astype("<f4").tobytes()
            (pred_dir / f"{sample_id}.f32x2").write_bytes(blob)
    return ids


def save_checkpoint(model, path) -> None:
    from dataclasses import asdict

    torch.save(
        {"state_dict": model.state_dict(), "net_config": asdict(model.config)},
        path,
    )


def load_checkpoint(path):
    from .net import NetConfig, build_net

    blob = torch.load(path, map_location="cpu", weights_only=True)
    cfg_dict = dict(blob["net_config"])
    cfg_dict["image_size"] = tuple(cfg_dict["image_size"])
    model = build_net(NetConfig(**cfg_dict))
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model
