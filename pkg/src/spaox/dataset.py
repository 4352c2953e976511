"""Dataset container: JSON manifest + per-sample raw float blobs.

Directory layout:

    <root>/manifest.json
    <root>/samples/<id>.f32x4

A blob holds four little-endian float32 arrays, row-major, in fixed
order: img700, img850, gt_seg, gt_so2. Each blob's CRC32 is recorded in
the manifest. Samples are write-once; the manifest commits the set.
Experimental data can be imported in the same format with
provenance="experimental-import".
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

__all__ = [
    "SampleRecord",
    "Dataset",
    "DatasetError",
    "VersionMismatchError",
    "TruncatedSampleError",
    "ChecksumError",
    "MissingEntryError",
    "split",
    "augment",
]

FORMAT_VERSION = 1
ARRAY_ORDER = ("img700", "img850", "gt_seg", "gt_so2")

ROTATE_MAX_DEG = 15.0
SHIFT_MAX_PX = 10
FLIP_PROB = 0.5


class DatasetError(Exception):
    pass


class VersionMismatchError(DatasetError):
    pass


class TruncatedSampleError(DatasetError):
    pass


class ChecksumError(DatasetError):
    pass


class MissingEntryError(DatasetError):
    pass


@dataclass(frozen=True)
class SampleRecord:
    """One sPA training/evaluation record (images are [z, x])."""

    id: str
    img700: np.ndarray
    img850: np.ndarray
    gt_seg: np.ndarray
    gt_so2: np.ndarray
    snr_db: float | str = "clean"
    provenance: str = "simulated"
    seed: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = {a.shape for a in (self.img700, self.img850, self.gt_seg, self.gt_so2)}
        if len(shapes) != 1:
            raise ValueError("record arrays must share dimensions")
        seg = np.asarray(self.gt_seg)
        if not np.isin(seg, (0, 1)).all():
            raise ValueError("gt_seg must be binary")
        if np.any((np.asarray(self.gt_so2) != 0) & (seg == 0)):
            raise ValueError("gt_so2 must be zero outside gt_seg")
        if self.provenance not in ("simulated", "experimental-import"):
            raise ValueError(f"unknown provenance: {self.provenance!r}")

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.img700, self.img850, self.gt_seg, self.gt_so2)


def _encode_blob(record: SampleRecord) -> bytes:
    return b"".join(np.asarray(a, dtype="<f4").tobytes() for a in record.arrays())


def split(ids: list[str], seed: int) -> dict[str, list[str]]:
    """Deterministic 80/10/10 split (test takes the remainder).

    Keyed on sorted ids, so the assignment does not depend on input order.
    """
    ordered = sorted(ids)
    if len(set(ordered)) != len(ordered):
        raise ValueError("duplicate sample ids")
    rng = np.random.default_rng(seed)
    perm = [ordered[i] for i in rng.permutation(len(ordered))]
    n = len(perm)
    n_train = int(n * 0.8)
    n_val = int(n * 0.1)
    return {
        "train": perm[:n_train],
        "val": perm[n_train:n_train + n_val],
        "test": perm[n_train + n_val:],
    }


def _apply_transform(arr, angle_deg, shift_zx, flip, binary):
    order = 0  # nearest-neighbor keeps binary masks binary
    out = np.asarray(arr, dtype=np.float64)
    if angle_deg != 0.0:
        out = ndimage.rotate(out, angle_deg, reshape=False, order=order, cval=0.0)
    if shift_zx != (0, 0):
        out = ndimage.shift(out, shift_zx, order=order, cval=0.0)
    if flip:
        out = out[:, ::-1].copy()
    if binary:
        out = (out > 0.5).astype(np.uint8)
    return out


def augment(record: SampleRecord, n_copies: int = 4, seed: int = 0) -> list[SampleRecord]:
    """Random rotation / shift / horizontal flip, the same transform
    applied to all four arrays; parameters are recorded per copy so any
    augmented record is reproducible from (original, seed)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_copies):
        angle = float(rng.uniform(-ROTATE_MAX_DEG, ROTATE_MAX_DEG))
        shift_zx = (
            int(rng.integers(-SHIFT_MAX_PX, SHIFT_MAX_PX + 1)),
            int(rng.integers(-SHIFT_MAX_PX, SHIFT_MAX_PX + 1)),
        )
        flip = bool(rng.random() < FLIP_PROB)
        params = {"rotate_deg": angle, "shift_zx": list(shift_zx), "flip": flip}
        arrays = {
            name: _apply_transform(arr, angle, shift_zx, flip, binary=(name == "gt_seg"))
            for name, arr in zip(ARRAY_ORDER, record.arrays())
        }
        # nearest-neighbor transforms move seg and so2 identically, but
        # enforce the support invariant against any edge effects
        arrays["gt_so2"] = arrays["gt_so2"] * arrays["gt_seg"]
        out.append(
            replace(
                record,
                id=f"{record.id}-aug{i}",
                metadata={**record.metadata, "augment": params},
                **arrays,
            )
        )
    return out


class Dataset:
    """A dataset directory: manifest plus sample blobs."""

    def __init__(self, root: Path, manifest: dict):
        self.root = Path(root)
        self.manifest = manifest

    # -- creation / loading -------------------------------------------------

    @classmethod
    def create(cls, root, image_shape=(128, 128), config_digest="") -> "Dataset":
        root = Path(root)
        (root / "samples").mkdir(parents=True, exist_ok=True)
        manifest = {
            "format_version": FORMAT_VERSION,
            "image_shape": list(image_shape),
            "config_digest": config_digest,
            "samples": [],
        }
        return cls(root, manifest)

    @classmethod
    def open(cls, root) -> "Dataset":
        root = Path(root)
        path = root / "manifest.json"
        if not path.exists():
            raise MissingEntryError(f"no manifest at {path}")
        manifest = json.loads(path.read_text(encoding="utf-8"))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise VersionMismatchError(
                f"manifest version {manifest.get('format_version')} != {FORMAT_VERSION}"
            )
        return cls(root, manifest)

    def save_manifest(self) -> None:
        text = json.dumps(self.manifest, indent=2, sort_keys=True)
        (self.root / "manifest.json").write_text(text, encoding="utf-8")

    # -- samples ------------------------------------------------------------

    @property
    def image_shape(self) -> tuple[int, int]:
        return tuple(self.manifest["image_shape"])

    def ids(self, split_name: str | None = None) -> list[str]:
        return [
            s["id"]
            for s in self.manifest["samples"]
            if split_name is None or s.get("split") == split_name
        ]

    def entry(self, sample_id: str) -> dict:
        for s in self.manifest["samples"]:
            if s["id"] == sample_id:
                return s
        raise MissingEntryError(f"sample {sample_id!r} not in manifest")

    def write_sample(self, record: SampleRecord, split_name: str | None = None) -> None:
        if record.img700.shape != self.image_shape:
            raise ValueError("record shape does not match dataset image_shape")
        blob = _encode_blob(record)
        rel = f"samples/{record.id}.f32x4"
        (self.root / rel).write_bytes(blob)
        entry = {
            "id": record.id,
            "path": rel,
            "crc32": zlib.crc32(blob),
            "snr_db": record.snr_db,
            "provenance": record.provenance,
            "seed": record.seed,
        }
        if split_name is not None:
            entry["split"] = split_name
        if record.metadata:
            entry["metadata"] = record.metadata
        self.manifest["samples"].append(entry)

    def read_sample(self, sample_id: str) -> SampleRecord:
        entry = self.entry(sample_id)
        path = self.root / entry["path"]
        if not path.exists():
            raise MissingEntryError(f"sample blob missing: {path}")
        blob = path.read_bytes()
        h, w = self.image_shape
        expected = 4 * h * w * 4
        if len(blob) != expected:
            raise TruncatedSampleError(
                f"{path}: expected {expected} bytes, got {len(blob)}"
            )
        if zlib.crc32(blob) != entry["crc32"]:
            raise ChecksumError(f"{path}: CRC32 mismatch")
        arrays = [
            np.frombuffer(blob, dtype="<f4", count=h * w, offset=i * h * w * 4)
            .reshape(h, w)
            .astype(np.float64)
            for i in range(4)
        ]
        return SampleRecord(
            id=entry["id"],
            img700=arrays[0],
            img850=arrays[1],
            gt_seg=arrays[2].astype(np.uint8),
            gt_so2=arrays[3],
            snr_db=entry["snr_db"],
            provenance=entry["provenance"],
            seed=entry["seed"],
            metadata=entry.get("metadata", {}),
        )

    def assign_splits(self, seed: int) -> None:
        assignment = split(self.ids(), seed)
        lookup = {sid: name for name, sids in assignment.items() for sid in sids}
        for entry in self.manifest["samples"]:
            entry["split"] = lookup[entry["id"]]
