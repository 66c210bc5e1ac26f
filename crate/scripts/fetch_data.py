#!/usr/bin/env python3
"""Download MNIST, Fashion-MNIST and CIFAR-10 into the layout the CLI expects.

    data/mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte
    data/fashion-mnist/...           (same names)
    data/cifar-10-batches-bin/data_batch_{1..5}.bin, test_batch.bin

Usage: python3 scripts/fetch_data.py [--data-dir data] [--limit-train N] [--limit-test N] mnist fashion-mnist cifar10
"""

import argparse
import gzip
import shutil
import struct
import sys
import tarfile
import tempfile
import urllib.request
from pathlib import Path

IDX_SOURCES = {
    "mnist": [
        "https://ossci-datasets.s3.amazonaws.com/mnist/",
        "https://storage.googleapis.com/cvdf-datasets/mnist/",
    ],
    "fashion-mnist": [
        "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
    ],
}
IDX_FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]
CIFAR_URL = "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"


def download(url, dest):
    print(f"fetching {url}", file=sys.stderr)
    with urllib.request.urlopen(url, timeout=60) as r, open(dest, "wb") as f:
        shutil.copyfileobj(r, f)


def truncate_idx(path, limit):
    """Keep the first `limit` records of an IDX file, fixing the header."""
    data = path.read_bytes()
    magic, n = struct.unpack(">II", data[:8])
    dims = (magic & 0xFF) - 1
    shape = struct.unpack(">" + "I" * dims, data[8 : 8 + 4 * dims])
    record = 1
    for d in shape:
        record *= d
    keep = min(n, limit)
    header = struct.pack(">II", magic, keep) + data[8 : 8 + 4 * dims]
    body_start = 8 + 4 * dims
    path.write_bytes(header + data[body_start : body_start + keep * record])


def fetch_idx(name, out, limit_train, limit_test):
    out.mkdir(parents=True, exist_ok=True)
    for f in IDX_FILES:
        target = out / f
        if not target.exists():
            for base in IDX_SOURCES[name]:
                try:
                    with tempfile.TemporaryDirectory() as tmp:
                        gz = Path(tmp) / (f + ".gz")
                        download(base + f + ".gz", gz)
                        with gzip.open(gz) as src, open(target, "wb") as dst:
                            shutil.copyfileobj(src, dst)
                    break
                except OSError as e:
                    print(f"  failed: {e}", file=sys.stderr)
            else:
                sys.exit(f"could not download {f}; fetch it manually into {out}")
        limit = limit_train if f.startswith("train") else limit_test
        if limit:
            truncate_idx(target, limit)


def fetch_cifar(out):
    if (out / "cifar-10-batches-bin" / "test_batch.bin").exists():
        return
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tgz = Path(tmp) / "cifar.tar.gz"
        download(CIFAR_URL, tgz)
        with tarfile.open(tgz) as t:
            t.extractall(out, filter="data")


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("datasets", nargs="*", default=["mnist"], choices=["mnist", "fashion-mnist", "cifar10"])
    p.add_argument("--data-dir", type=Path, default=Path("data"))
    p.add_argument("--limit-train", type=int, default=0, help="keep only the first N training images")
    p.add_argument("--limit-test", type=int, default=0, help="keep only the first N test images")
    a = p.parse_args()
    for d in a.datasets:
        if d == "cifar10":
            fetch_cifar(a.data_dir)
        else:
            fetch_idx(d, a.data_dir / d, a.limit_train, a.limit_test)
    print("done", file=sys.stderr)


if __name__ == "__main__":
    main()
