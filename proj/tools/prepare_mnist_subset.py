#!/usr/bin/env python3
# Copyright 2026 The mofhei Authors
# SPDX-License-Identifier: Apache-2.0
"""Convert the digit JSON files shipped by the npm `mnist` package into IDX.

The npm package carries ~10,000 real MNIST digits stored as 784 grayscale
values in [0, 1] (pixel / 255, rounded to three decimals). This script
restores the 8-bit pixels and writes gzipped IDX files:

    <out>/images-idx3-ubyte.gz   magic 0x00000803, dims (n, 28, 28)
    <out>/labels-idx1-ubyte.gz   magic 0x00000801, dims (n,)

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/prepare_mnist_subset.py package/src/digits data/mnist10k
"""

import gzip
import json
import pathlib
import struct
import sys


def main(argv):
    if len(argv) != 3:
        print(__doc__)
        return 2
    src = pathlib.Path(argv[1])
    out = pathlib.Path(argv[2])
    out.mkdir(parents=True, exist_ok=True)

    images = bytearray()
    labels = bytearray()
    count = 0
    for digit in range(10):
        values = json.loads((src / f"{digit}.json").read_text())["data"]
        if len(values) % 784 != 0:
            raise ValueError(f"{digit}.json: {len(values)} values is not a multiple of 784")
        for v in values:
            images.append(max(0, min(255, round(v * 255))))
        n = len(values) // 784
        labels.extend([digit] * n)
        count += n

    with gzip.GzipFile(out / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, count, 28, 28))
        f.write(images)
    with gzip.GzipFile(out / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, count))
        f.write(labels)
    print(f"wrote {count} digits to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
