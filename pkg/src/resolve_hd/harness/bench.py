"""Attention-score microbenchmark: float QK^T vs dense and bit-packed HD-attention.

Each path computes an ``N x N`` score matrix from operands prepared ahead of
time, so the timings cover score computation only. Byte counts come from a
counter that every kernel feeds with the operands it reads, expanded to the
shape the kernel iterates over (a broadcast operand is counted once per use,
not once per allocation). Dividing by the number of scores gives the logical
bytes read per score.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import vsa
from ..hd_attention import packed_dots, packed_operands


class ByteCounter:
    def __init__(self):
        self.total = 0

    def read(self, array, shape):
        """Count ``array`` as read once per element of ``shape`` it broadcasts to."""
        self.total += int(np.prod(shape)) * array.dtype.itemsize
        return array


def float_scores(q, k, counter=None):
    """``q @ k.T`` over float32 (N, E) operands."""
    if counter is not None:
        shape = (q.shape[0], k.shape[0], q.shape[1])
        counter.read(q, shape)
        counter.read(k, shape)
    return q @ k.T


def dense_hd_scores(own, pair, counter=None):
    """Integer-valued ``<own_i, pair_ij>`` with float32 bipolar operands."""
    if counter is not None:
        counter.read(own, pair.shape)
        counter.read(pair, pair.shape)
    return (pair @ own[:, :, None])[..., 0]


def packed_hd_scores(own: vsa.PackedBipolar, pair: vsa.PackedBipolar, counter=None):
    """Same scores as :func:`dense_hd_scores` from packed words and zero masks.

    Per score the kernel reads one word and one mask word of each operand
    plus the tail-validity word, for every one of the ``ceil(D / 64)`` words.
    """
    if counter is not None:
        shape = pair.words.shape
        for arr in (own.words, own.zero_mask, pair.words, pair.zero_mask, vsa._valid_mask(own.dim)):
            counter.read(arr, shape)
    return packed_dots(own, pair)


@dataclass
class PathResult:
    name: str
    seconds: float
    ns_per_score: float
    bytes_per_score: float


@dataclass
class BenchReport:
    N: int
    D: int
    emb: int
    reps: int
    paths: list[PathResult] = field(default_factory=list)
    dense_equals_packed: bool = False

    def path(self, name) -> PathResult:
        return next(p for p in self.paths if p.name == name)

    @property
    def packed_over_float_bytes(self):
        return self.path("packed_hd").bytes_per_score / self.path("float_qk").bytes_per_score

    @property
    def packed_speedup_over_dense(self):
        return self.path("dense_hd").seconds / self.path("packed_hd").seconds

    @property
    def packed_speedup_over_float(self):
        return self.path("float_qk").seconds / self.path("packed_hd").seconds

    def to_dict(self):
        d = asdict(self)
        d.update(packed_over_float_bytes=self.packed_over_float_bytes,
                 packed_speedup_over_dense=self.packed_speedup_over_dense,
                 packed_speedup_over_float=self.packed_speedup_over_float)
        return d

    def format(self):
        lines = [f"attention scores: N={self.N} D={self.D} emb={self.emb} reps={self.reps}",
                 f"{'path':<10} {'ms/call':>10} {'ns/score':>10} {'bytes/score':>12}"]
        for p in self.paths:
            lines.append(f"{p.name:<10} {p.seconds * 1e3:>10.4f} {p.ns_per_score:>10.2f} "
                         f"{p.bytes_per_score:>12.1f}")
        lines.append(f"packed/float bytes per score: {self.packed_over_float_bytes:.4f}")
        lines.append(f"packed speedup over dense HD: {self.packed_speedup_over_dense:.2f}x")
        lines.append(f"packed speedup over float QK^T: {self.packed_speedup_over_float:.2f}x")
        lines.append(f"dense HD == packed HD: {self.dense_equals_packed}")
        return "\n".join(lines)


def _time(fn, reps):
    fn()  # warm-up
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


def bench_attention(N=64, D=1024, emb=None, reps=20, seed=0) -> BenchReport:
    """Time and byte-count the three score paths on random float32 inputs.

    ``emb`` is the width of the float QK^T operands and defaults to ``D``
    (equal-width comparison).
    """
    emb = D if emb is None else emb
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((N, emb)).astype(np.float32)
    k = rng.standard_normal((N, emb)).astype(np.float32)
    h = rng.standard_normal((N, D)).astype(np.float32)
    own_f = vsa.bipolarize(h).astype(np.float32)
    pair_f = vsa.bipolarize(h[:, None, :] + h[None, :, :]).astype(np.float32)
    own_p, pair_p = packed_operands(h)

    report = BenchReport(N, D, emb, reps)
    n_scores = N * N
    for name, fn, args in (("float_qk", float_scores, (q, k)),
                           ("dense_hd", dense_hd_scores, (own_f, pair_f)),
                           ("packed_hd", packed_hd_scores, (own_p, pair_p))):
        counter = ByteCounter()
        fn(*args, counter=counter)
        seconds = _time(lambda: fn(*args), reps)
        report.paths.append(PathResult(name, seconds, seconds / n_scores * 1e9,
                                       counter.total / n_scores))
    dense = dense_hd_scores(own_f, pair_f)
    packed = packed_hd_scores(own_p, pair_p)
    report.dense_equals_packed = bool(np.array_equal(dense.astype(np.int64), packed))
    return report
