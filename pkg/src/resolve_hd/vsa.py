"""Hypervector algebra: bipolarize, bundle, bind, cosine, and bit-packed dots.

Packing convention: coordinate ``k`` lives in word ``k // 64`` at bit position
``k % 64`` counted from the most significant bit, so a vector reads
left-to-right in the binary rendering of its words. A set bit in ``words``
means +1. ``zero_mask`` sets the bit of every coordinate that is exactly 0.
Bits past ``dim`` are zero in both arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

WORD_BITS = 64


def bipolarize(v):
    """Coordinate-wise sign: -1 below zero, +1 above, 0 at exactly zero."""
    return np.sign(np.asarray(v))


def _check_dims(op, *vs):
    shape = np.shape(vs[0])[-1:]
    for v in vs[1:]:
        if np.shape(v)[-1:] != shape:
            raise ShapeError(op, np.shape(vs[0]), np.shape(v))


def bundle(*vs):
    """Element-wise real sum of hypervectors."""
    _check_dims("bundle", *vs)
    out = np.asarray(vs[0])
    for v in vs[1:]:
        out = out + np.asarray(v)
    return out


def bind(a, b):
    """Hadamard product."""
    _check_dims("bind", a, b)
    return np.asarray(a) * np.asarray(b)


def bipolar_cosine(a, b):
    """``<a, b> / D`` for ternary vectors (their norms are taken to be sqrt(D))."""
    _check_dims("bipolar_cosine", a, b)
    a, b = np.asarray(a), np.asarray(b)
    return (a * b).sum(-1) / a.shape[-1]


@dataclass(frozen=True)
class PackedBipolar:
    dim: int
    words: np.ndarray  # uint64, shape (..., n_words)
    zero_mask: np.ndarray  # uint64, same shape

    @property
    def nbytes(self):
        return self.words.nbytes + self.zero_mask.nbytes


def n_words(dim):
    return -(-dim // WORD_BITS)


def _pack_bits(bits: np.ndarray, dim: int) -> np.ndarray:
    pad = n_words(dim) * WORD_BITS - dim
    if pad:
        bits = np.concatenate([bits, np.zeros(bits.shape[:-1] + (pad,), dtype=bits.dtype)], -1)
    packed = np.packbits(bits, axis=-1, bitorder="big")
    return np.ascontiguousarray(packed).view(">u8").astype(np.uint64)


def _unpack_bits(words: np.ndarray, dim: int) -> np.ndarray:
    as_bytes = words.astype(">u8").view(np.uint8)
    return np.unpackbits(as_bytes, axis=-1, bitorder="big")[..., :dim]


def pack(v) -> PackedBipolar:
    """Pack ternary vectors (last axis) into sign words plus a zero mask."""
    v = np.asarray(v)
    if not np.isin(v, (-1, 0, 1)).all():
        raise ValueError("pack expects values in {-1, 0, +1}")
    dim = v.shape[-1]
    return PackedBipolar(dim, _pack_bits((v > 0).astype(np.uint8), dim),
                         _pack_bits((v == 0).astype(np.uint8), dim))


def unpack(p: PackedBipolar) -> np.ndarray:
    pos = _unpack_bits(p.words, p.dim).astype(np.int8)
    zero = _unpack_bits(p.zero_mask, p.dim).astype(bool)
    out = 2 * pos - 1
    out[zero] = 0
    return out


def _valid_mask(dim):
    mask = np.full(n_words(dim), np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
    tail = dim % WORD_BITS
    if tail:
        mask[-1] = np.uint64(((1 << tail) - 1) << (WORD_BITS - tail))
    return mask


def packed_dot(a: PackedBipolar, b: PackedBipolar):
    """Exact ``sum_i a_i b_i`` over packed ternary vectors (broadcasts over leading axes).

    Over coordinates nonzero in both, the dot is ``n_both - 2 * hamming``.
    """
    if a.dim != b.dim:
        raise ShapeError("packed_dot", (a.dim,), (b.dim,))
    nz = ~(a.zero_mask | b.zero_mask) & _valid_mask(a.dim)
    diff = (a.words ^ b.words) & nz
    both = np.bitwise_count(nz).sum(-1, dtype=np.int64)
    return both - 2 * np.bitwise_count(diff).sum(-1, dtype=np.int64)


def random_bipolar(rng, n, dim):
    return rng.choice(np.array([-1, 1], dtype=np.int8), size=(n, dim))
