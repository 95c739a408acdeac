#!/usr/bin/env python3
"""Convert the per-digit JSON files shipped with the npm `mnist` package
(src/digits/<d>.json, 784 floats per sample in [0,1]) into a pair of IDX
files. Samples are interleaved with a fixed-seed shuffle so any prefix/suffix
split is class-mixed."""

import argparse
import json
import random
import struct
from pathlib import Path


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    samples = []
    for d in range(10):
        raw = json.loads((args.digits_dir / f"{d}.json").read_text())["data"]
        if len(raw) % 784:
            raise SystemExit(f"{d}.json: length {len(raw)} not a multiple of 784")
        for k in range(0, len(raw), 784):
            px = bytes(min(255, max(0, round(v * 255))) for v in raw[k:k + 784])
            samples.append((px, d))
    random.Random(args.seed).shuffle(samples)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    n = len(samples)
    with open(args.out_dir / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for px, _ in samples:
            f.write(px)
    with open(args.out_dir / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(label for _, label in samples))
    print(f"wrote {n} samples to {args.out_dir}")


if __name__ == "__main__":
    main()
