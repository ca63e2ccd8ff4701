#!/usr/bin/env python3
"""Convert the digits bundled in the npm `mnist` package into gzipped IDX files.

The package ships ~10,000 MNIST digits as per-class JSON arrays of
pixel/255 values rounded to three decimals; rounding back to bytes is exact.
Each class is split 80/20 into train/test and both splits are shuffled with
a fixed seed.

    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python3 scripts/npm_mnist_to_idx.py package/src/digits data/mnist-desk
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def write_images(path, images):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main(src, dst):
    src, dst = Path(src), Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        imgs = [
            [int(round(v * 255)) for v in flat[i : i + 784]]
            for i in range(0, len(flat), 784)
        ]
        cut = int(len(imgs) * 0.8)
        train += [(img, digit) for img in imgs[:cut]]
        test += [(img, digit) for img in imgs[cut:]]
    rng = random.Random(20200601)
    rng.shuffle(train)
    rng.shuffle(test)
    for name, rows in (("train", train), ("t10k", test)):
        write_images(dst / f"{name}-images-idx3-ubyte.gz", [r[0] for r in rows])
        write_labels(dst / f"{name}-labels-idx1-ubyte.gz", [r[1] for r in rows])
        print(name, len(rows))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
