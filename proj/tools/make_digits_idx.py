#!/usr/bin/env python3
"""Package the scikit-learn digits set as IDX files.

Produces a small, fully offline image-classification fixture with the same
file format as the classic 28x28 benchmarks: four IDX files (train/test x
images/labels) under data/. The split is stratified per class and fixed by a
hard-coded seed, so regenerating the files is reproducible bit for bit.

Usage: python3 tools/make_digits_idx.py [out_dir]
"""

import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits

SEED = 12345
TRAIN_FRACTION = 0.7


def write_idx_images(path: Path, images: np.ndarray) -> None:
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data")
    out_dir.mkdir(parents=True, exist_ok=True)

    digits = load_digits()
    # Pixels arrive in 0..16; rescale to the usual 0..255 byte range.
    images = np.round(digits.images * (255.0 / 16.0)).astype(np.uint8)
    labels = digits.target.astype(np.uint8)

    rng = np.random.default_rng(SEED)
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        cut = int(round(TRAIN_FRACTION * len(members)))
        train_idx.extend(members[:cut])
        test_idx.extend(members[cut:])
    train_idx = np.sort(np.array(train_idx))
    test_idx = np.sort(np.array(test_idx))

    write_idx_images(out_dir / "digits-train-images.idx", images[train_idx])
    write_idx_labels(out_dir / "digits-train-labels.idx", labels[train_idx])
    write_idx_images(out_dir / "digits-test-images.idx", images[test_idx])
    write_idx_labels(out_dir / "digits-test-labels.idx", labels[test_idx])

    for name, idx in (("train", train_idx), ("test", test_idx)):
        counts = np.bincount(labels[idx], minlength=10)
        print(f"{name}: {len(idx)} samples, per-class {counts.tolist()}")


if __name__ == "__main__":
    main()
