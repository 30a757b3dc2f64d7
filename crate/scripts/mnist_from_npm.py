#!/usr/bin/env python3
"""Rebuild data/mnist-10k from the digits bundled in the `mnist` npm package.

The package ships ~10k MNIST digits as JSON arrays of pixel intensities
rounded to three decimals. This script maps them back to bytes
(round(v * 255)), shuffles with a fixed seed and writes a gzipped IDX pair.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist-10k
"""
import gzip
import json
import os
import random
import struct
import sys


def main(digits_dir, out_dir):
    samples = []
    for label in range(10):
        with open(os.path.join(digits_dir, f"{label}.json")) as f:
            flat = json.load(f)["data"]
        assert len(flat) % 784 == 0
        for i in range(0, len(flat), 784):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in flat[i:i + 784])
            samples.append((pixels, label))
    random.Random(20200729).shuffle(samples)
    n = len(samples)
    os.makedirs(out_dir, exist_ok=True)
    with gzip.GzipFile(os.path.join(out_dir, "images-idx3-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for pixels, _ in samples:
            f.write(pixels)
    with gzip.GzipFile(os.path.join(out_dir, "labels-idx1-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(label for _, label in samples))
    print(f"wrote {n} samples to {out_dir}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
