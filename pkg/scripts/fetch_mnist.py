"""Write MNIST digits as IDX files for the MNIST-Math task.

Without network access to the original MNIST mirrors, the 5000-image subset
shipped inside the ``mlxtend`` wheel (``mlxtend/data/data/mnist_5k.csv.gz``,
784 pixel columns followed by the label) is the source. The wheel is fetched
through pip and read as a zip archive; mlxtend itself is never installed.

    python scripts/fetch_mnist.py --out data/mnist
    python scripts/fetch_mnist.py --wheel /path/to/mlxtend-0.24.0-py3-none-any.whl
"""
from __future__ import annotations

import argparse
import gzip
import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

import numpy as np

from resolve_hd.tasks import load_mnist_idx, write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def download_wheel(dest):
    subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:",
                    "-d", str(dest), "mlxtend==0.24.0"], check=True)
    return next(Path(dest).glob("mlxtend-*.whl"))


def read_subset(wheel):
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read(MEMBER))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    images = table[:, :-1].reshape(-1, 28, 28).astype(np.uint8)
    labels = table[:, -1].astype(np.uint8)
    return images, labels


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="data/mnist", help="output directory")
    ap.add_argument("--wheel", help="use a local mlxtend wheel instead of downloading")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        wheel = Path(args.wheel) if args.wheel else download_wheel(tmp)
        images, labels = read_subset(wheel)
    img_path, lab_path = out / "images-idx3-ubyte", out / "labels-idx1-ubyte"
    write_idx(img_path, images)
    write_idx(lab_path, labels)
    back_images, back_labels = load_mnist_idx(img_path, lab_path)
    assert np.array_equal(back_images, images) and np.array_equal(back_labels, labels)
    counts = np.bincount(labels, minlength=10)
    print(f"wrote {len(labels)} images to {out} (per-digit counts {counts.tolist()})")


if __name__ == "__main__":
    main()
