#!/usr/bin/env python3
"""Download the Fashion-MNIST IDX files (needs network access).

Fetches the four gzipped IDX files into data/fashion/ and verifies their
sizes. The training configs and the acceptance suite look for them at that
path and fall back to the bundled digits fixture when they are absent, so
running this script is only needed for full-scale reproduction.

Usage: python3 tools/fetch_fashion_mnist.py [out_dir]
"""

import sys
import urllib.request
from pathlib import Path

BASE = "https://storage.googleapis.com/tensorflow/tf-keras-datasets/"
FILES = {
    "train-images-idx3-ubyte.gz": 26421880,
    "train-labels-idx1-ubyte.gz": 29515,
    "t10k-images-idx3-ubyte.gz": 4422102,
    "t10k-labels-idx1-ubyte.gz": 5148,
}


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/fashion")
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, expected_size in FILES.items():
        dest = out_dir / name
        if dest.exists() and dest.stat().st_size == expected_size:
            print(f"{name}: already present")
            continue
        print(f"fetching {name} ...")
        urllib.request.urlretrieve(BASE + name, dest)
        size = dest.stat().st_size
        if size != expected_size:
            raise SystemExit(
                f"{name}: got {size} bytes, expected {expected_size}")
        print(f"{name}: {size} bytes")


if __name__ == "__main__":
    main()
