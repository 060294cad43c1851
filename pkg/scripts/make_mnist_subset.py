"""Write the 5000-image MNIST subset shipped with mlxtend as gzipped IDX files.

Usage: python scripts/make_mnist_subset.py OUT_DIR [--wheel PATH]

The subset lives in ``mlxtend/data/data/mnist_5k.csv.gz``: one row per image,
784 pixel bytes followed by the label. It is read either from an installed
mlxtend or straight out of a downloaded wheel.
"""
import argparse
import gzip
import io
import zipfile
from pathlib import Path

import numpy as np

from eqgrad.harness.idx import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_csv_bytes(wheel):
    if wheel:
        with zipfile.ZipFile(wheel) as zf:
            return zf.read(MEMBER)
    import mlxtend

    return (Path(mlxtend.__file__).parent / "data" / "data" / "mnist_5k.csv.gz").read_bytes()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--wheel", type=Path, default=None, help="mlxtend wheel to read from")
    args = ap.parse_args()

    raw = gzip.decompress(read_csv_bytes(args.wheel))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    images = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_idx(args.out_dir / "images-idx3-ubyte.gz", images)
    write_idx(args.out_dir / "labels-idx1-ubyte.gz", labels)
    print(f"wrote {len(labels)} images to {args.out_dir}")


if __name__ == "__main__":
    main()
