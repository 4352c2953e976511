#!/usr/bin/env python3
"""Build an augmented training container from an existing dataset.

Copies every sample, keeping splits; train-split samples additionally get
N randomly rotated/shifted/flipped copies (also marked train). Uses the
dataset library of the producing package; the trainer itself only ever
reads the resulting container.

Usage: augment_train.py <src_dataset> <dst_dataset> [--copies 4] [--seed 0]
"""

import argparse

from spaox.dataset import Dataset, augment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("src")
    ap.add_argument("dst")
    ap.add_argument("--copies", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    src = Dataset.open(args.src)
    dst = Dataset.create(args.dst, image_shape=src.image_shape,
                         config_digest=src.manifest.get("config_digest", ""))
    n_aug = 0
    for i, sample_id in enumerate(src.ids()):
        rec = src.read_sample(sample_id)
        split_name = src.entry(sample_id).get("split")
        dst.write_sample(rec, split_name)
        if split_name == "train":
            for copy in augment(rec, n_copies=args.copies, seed=args.seed + i):
                dst.write_sample(copy, "train")
                n_aug += 1
    dst.save_manifest()
    print(f"copied {len(src.ids())} samples, added {n_aug} augmented train samples")


if __name__ == "__main__":
    main()
