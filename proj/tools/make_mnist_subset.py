#!/usr/bin/env python3
"""Convert the digit samples shipped in the `mnist` npm package into IDX files.

The package (MIT, github.com/cazala/mnist) bundles 10000 MNIST digits as
JSON arrays of pixel/255 rounded to three decimals; rounding back to bytes is
exact.  Output is the standard gzipped IDX pair:

    train-images-idx3-ubyte.gz   magic 0x00000803, N, 28, 28, pixels
    train-labels-idx1-ubyte.gz   magic 0x00000801, N, labels

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist-subset
"""

import gzip
import json
import pathlib
import struct
import sys


def main(argv):
    if len(argv) != 3:
        print(__doc__, file=sys.stderr)
        return 1
    src = pathlib.Path(argv[1])
    dst = pathlib.Path(argv[2])
    dst.mkdir(parents=True, exist_ok=True)

    images = bytearray()
    labels = bytearray()
    # interleave digits so the file is not sorted by class
    per_digit = []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        per_digit.append([data[i:i + 784] for i in range(0, len(data), 784)])
    cursor = [0] * 10
    remaining = sum(len(d) for d in per_digit)
    while remaining:
        for digit in range(10):
            if cursor[digit] < len(per_digit[digit]):
                pixels = per_digit[digit][cursor[digit]]
                images.extend(min(255, max(0, round(v * 255))) for v in pixels)
                labels.append(digit)
                cursor[digit] += 1
                remaining -= 1

    n = len(labels)
    with gzip.GzipFile(dst / "train-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        f.write(bytes(images))
    with gzip.GzipFile(dst / "train-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(labels))
    print(f"wrote {n} images to {dst}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
