#!/usr/bin/env python3
"""Write the 5000-digit MNIST sample shipped with mlxtend as IDX files.

The sample holds 500 digits per class. The first 400 of each class go to the
train split, the remaining 100 to the test split. Output file names follow
the official MNIST layout so the same loader handles both.

    python3 tools/make_mnist_subset.py data/mnist5k
"""

import gzip
import io
import os
import struct
import sys

import numpy as np


def _load_sample():
    import mlxtend.data

    path = os.path.join(os.path.dirname(mlxtend.data.__file__), "data", "mnist_5k.csv.gz")
    with gzip.open(path, "rb") as fh:
        raw = np.loadtxt(io.BytesIO(fh.read()), delimiter=",")
    return raw[:, :-1].astype(np.uint8), raw[:, -1].astype(np.uint8)


def _write_images(path, images):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, images.shape[0], 28, 28))
        fh.write(images.astype(np.uint8).tobytes())


def _write_labels(path, labels):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        fh.write(labels.astype(np.uint8).tobytes())


def main(out_dir):
    images, labels = _load_sample()
    train_idx, test_idx = [], []
    for digit in range(10):
        idx = np.flatnonzero(labels == digit)
        train_idx.extend(idx[:400])
        test_idx.extend(idx[400:])
    rng = np.random.default_rng(0)
    train_idx = rng.permutation(np.array(train_idx))
    test_idx = rng.permutation(np.array(test_idx))

    os.makedirs(out_dir, exist_ok=True)
    _write_images(os.path.join(out_dir, "train-images-idx3-ubyte"), images[train_idx])
    _write_labels(os.path.join(out_dir, "train-labels-idx1-ubyte"), labels[train_idx])
    _write_images(os.path.join(out_dir, "t10k-images-idx3-ubyte"), images[test_idx])
    _write_labels(os.path.join(out_dir, "t10k-labels-idx1-ubyte"), labels[test_idx])
    print(f"train {len(train_idx)}, test {len(test_idx)} -> {out_dir}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/mnist5k")
