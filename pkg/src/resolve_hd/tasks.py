"""Synthetic relational tasks, the MNIST IDX reader, and accuracy metrics."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IDXDimensionError, IDXMagicError, IDXTruncatedError

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049


@dataclass
class TaskDataset:
    inputs: np.ndarray  # (n, N, F)
    targets: np.ndarray  # (n,) labels or (n, N) index sequences
    splits: dict  # name -> index array into inputs
    seed: int
    meta: dict = field(default_factory=dict)

    def subset(self, split, indices=None):
        idx = self.splits[split] if indices is None else np.asarray(indices)
        return self.inputs[idx], self.targets[idx]

    def train_subset(self, size, seed):
        """``size`` indices drawn without replacement from the training pool."""
        pool = self.splits["train"]
        if size > len(pool):
            raise ValueError(f"train size {size} exceeds pool of {len(pool)}")
        rng = np.random.default_rng(seed)
        return np.sort(rng.choice(pool, size, replace=False))


def split_indices(n, fractions, rng):
    """Shuffle ``range(n)`` and cut it into named parts.

    ``fractions`` maps split name to fraction; each part gets ``floor(frac*n)``
    items and the remainder goes to ``train``.
    """
    order = rng.permutation(n)
    splits, start = {}, 0
    for name, frac in fractions.items():
        k = int(np.floor(frac * n))
        splits[name] = np.sort(order[start:start + k])
        start += k
    splits["train"] = np.sort(order[start:])
    return splits


def gen_pairwise_order(seed, n_objects=64, dim=32, val_frac=0.15, test_frac=0.35,
                       include_self_pairs=True) -> TaskDataset:
    """All ordered pairs of random Gaussian objects, labelled 1 iff ``i < j``."""
    rng = np.random.default_rng(seed)
    objects = rng.normal(size=(n_objects, dim))
    i, j = np.meshgrid(np.arange(n_objects), np.arange(n_objects), indexing="ij")
    i, j = i.ravel(), j.ravel()
    if not include_self_pairs:
        keep = i != j
        i, j = i[keep], j[keep]
    inputs = np.stack([objects[i], objects[j]], axis=1)
    targets = (i < j).astype(np.int64)
    splits = split_indices(len(i), {"val": val_frac, "test": test_frac}, rng)
    return TaskDataset(inputs, targets, splits, seed,
                       dict(task="pairwise", objects=objects, pairs=np.stack([i, j], 1)))


def sorting_objects(rng, n_a=4, n_b=12, dim_a=4, dim_b=8):
    """Objects ``(a_i, b_j)`` with their lexicographic rank (A primary, B secondary)."""
    A = rng.normal(size=(n_a, dim_a))
    B = rng.normal(size=(n_b, dim_b))
    ai, bj = np.meshgrid(np.arange(n_a), np.arange(n_b), indexing="ij")
    ai, bj = ai.ravel(), bj.ravel()
    objects = np.concatenate([A[ai], B[bj]], axis=1)
    rank = ai * n_b + bj
    return objects, rank, np.stack([ai, bj], 1)


def gen_sorting(seed, seq_len=6, n_sequences=1500, n_a=4, n_b=12, dim_a=4, dim_b=8,
                val_frac=0.10, test_frac=0.20) -> TaskDataset:
    """Random sequences of distinct objects; targets are their argsort indices."""
    rng = np.random.default_rng(seed)
    objects, rank, attrs = sorting_objects(rng, n_a, n_b, dim_a, dim_b)
    seen, seqs = set(), []
    while len(seqs) < n_sequences:
        s = tuple(rng.choice(len(objects), seq_len, replace=False))
        if s not in seen:
            seen.add(s)
            seqs.append(s)
    seqs = np.array(seqs)
    inputs = objects[seqs]
    targets = np.argsort(rank[seqs], axis=1, kind="stable")
    splits = split_indices(len(seqs), {"val": val_frac, "test": test_frac}, rng)
    return TaskDataset(inputs, targets, splits, seed,
                       dict(task="sorting", objects=objects, rank=rank, attrs=attrs, sequences=seqs))


# -- IDX ----------------------------------------------------------------------

def _read_idx(path, magic, ndim):
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise IDXTruncatedError(f"{path}: missing header")
    got = struct.unpack(">i", raw[:4])[0]
    if got != magic:
        raise IDXMagicError(f"{path}: magic {got}, expected {magic}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IDXTruncatedError(f"{path}: header shorter than {header} bytes")
    dims = struct.unpack(">" + "i" * ndim, raw[4:header])
    need = int(np.prod(dims))
    if len(raw) - header < need:
        raise IDXTruncatedError(f"{path}: {len(raw) - header} payload bytes, expected {need}")
    return np.frombuffer(raw, dtype=np.uint8, count=need, offset=header).reshape(dims)


def load_mnist_idx(images_path, labels_path):
    """Parse an IDX image file (magic 2051) and label file (magic 2049)."""
    images = _read_idx(images_path, IDX_IMAGE_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABEL_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IDXDimensionError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return images, labels


def write_idx(path, array):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = {3: IDX_IMAGE_MAGIC, 1: IDX_LABEL_MAGIC}[array.ndim]
    with open(path, "wb") as f:
        f.write(struct.pack(">i", magic))
        f.write(struct.pack(">" + "i" * array.ndim, *array.shape))
        f.write(array.tobytes())


def mnist_math_label(a, b):
    return np.abs(3 * np.asarray(a) - 2 * np.asarray(b))


def gen_mnist_math(images, labels, seed, n_pairs=10000, val_frac=0.10, test_frac=0.20) -> TaskDataset:
    """Pairs of digit images labelled ``|3a - 2b|`` (28 classes).

    The image pool is split first and each pair is drawn within one part, so
    no test image is ever seen in training.
    """
    rng = np.random.default_rng(seed)
    pool = split_indices(len(labels), {"val": val_frac, "test": test_frac}, rng)
    pair_split = split_indices(n_pairs, {"val": val_frac, "test": test_frac}, rng)
    pair_idx = np.empty((n_pairs, 2), dtype=np.int64)
    for name, where in pair_split.items():
        pair_idx[where] = rng.choice(pool[name], size=(len(where), 2))
    flat = images.reshape(len(images), -1).astype(np.float32) / 255.0
    inputs = flat[pair_idx]
    digits = labels[pair_idx].astype(np.int64)
    targets = mnist_math_label(digits[:, 0], digits[:, 1])
    return TaskDataset(inputs, targets, pair_split, seed,
                       dict(task="mnist_math", digits=digits, image_index=pair_idx, n_classes=28))


# -- metrics ----------------------------------------------------------------

def _pair(pred, target):
    pred, target = np.asarray(pred), np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return pred, target


def element_wise_accuracy(pred, target):
    pred, target = _pair(pred, target)
    return float((pred == target).mean())


def full_sequence_accuracy(pred, target):
    """Fraction of sequences (rows; a 1-D input is one sequence) matched exactly."""
    pred, target = _pair(pred, target)
    if pred.ndim == 1:
        return float((pred == target).all())
    return float((pred == target).all(axis=tuple(range(1, pred.ndim))).mean())


# -- inspection format ------------------------------------------------------

def save_dataset_text(ds: TaskDataset, path):
    """Tab-separated columns: index, split, target, input values (row-major)."""
    which = np.empty(len(ds.inputs), dtype=object)
    for name, idx in ds.splits.items():
        which[idx] = name
    with open(path, "w", newline="") as f:
        w = csv.writer(f, delimiter="\t")
        w.writerow(["index", "split", "target", "input_shape", "input"])
        for i in range(len(ds.inputs)):
            tgt = " ".join(str(int(v)) for v in np.atleast_1d(ds.targets[i]))
            x = " ".join(repr(float(v)) for v in ds.inputs[i].ravel())
            w.writerow([i, which[i], tgt, "x".join(map(str, ds.inputs[i].shape)), x])


def load_dataset_text(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f, delimiter="\t"))
    shape = tuple(int(s) for s in rows[0]["input_shape"].split("x"))
    inputs = np.array([[float(v) for v in r["input"].split()] for r in rows]).reshape(-1, *shape)
    targets = [np.array([int(v) for v in r["target"].split()]) for r in rows]
    targets = np.array([t[0] if len(t) == 1 else t for t in targets])
    splits = {}
    for r in rows:
        splits.setdefault(r["split"], []).append(int(r["index"]))
    return inputs, targets, {k: np.array(v) for k, v in splits.items()}
