import json
import zlib

import numpy as np
import pytest


def make_container(root, n_samples=6, shape=(32, 32), seed=0, splits=None):
    """Write a small dataset container directly in the on-disk format.

    gt_seg is a filled disk, gt_so2 a constant inside it, and the input
    images are smooth functions of the ground truth so a network can
    learn the mapping.
    """
    rng = np.random.default_rng(seed)
    (root / "samples").mkdir(parents=True)
    h, w = shape
    zz, xx = np.mgrid[0:h, 0:w]
    entries = []
    for i in range(n_samples):
        cz, cx = rng.uniform(h * 0.3, h * 0.7), rng.uniform(w * 0.3, w * 0.7)
        r = rng.uniform(3, 6)
        seg = ((zz - cz) ** 2 + (xx - cx) ** 2 <= r * r).astype(np.float32)
        so2 = np.float32(rng.uniform(0.3, 0.9)) * seg
        img700 = (0.2 + 0.6 * seg * (1.0 - so2) + 0.05 * rng.random(shape)).astype(np.float32)
        img850 = (0.2 + 0.6 * seg * so2 + 0.05 * rng.random(shape)).astype(np.float32)
        sample_id = f"s{i:03d}"
        blob = b"".join(a.astype("<f4").tobytes() for a in (img700, img850, seg, so2))
        (root / "samples" / f"{sample_id}.f32x4").write_bytes(blob)
        entry = {
            "id": sample_id,
            "path": f"samples/{sample_id}.f32x4",
            "crc32": zlib.crc32(blob),
            "snr_db": "clean",
            "provenance": "simulated",
            "seed": i,
        }
        if splits:
            entry["split"] = splits[i % len(splits)]
        entries.append(entry)
    manifest = {
        "format_version": 1,
        "image_shape": list(shape),
        "config_digest": "",
        "samples": entries,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return root


@pytest.fixture
def container(tmp_path):
    return make_container(tmp_path / "ds", splits=("train", "train", "val", "test"))
