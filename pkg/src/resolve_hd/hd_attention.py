"""HD-attention: relation scores from bipolarized pair bundles, softmax, mixing.

``R[i, j] = <sign(h_i), sign(h_i + h_j)> / D``. The trainable path runs on
tensors through the straight-through sign; the dense and packed numpy paths
are inference-only and must agree exactly.
"""
from __future__ import annotations

import numba
import numpy as np

from . import tensor as T
from . import vsa
from .errors import ShapeError


def relation_tensor(h) -> T.Tensor:
    """``(..., N, D)`` hypervectors to ``(..., N, N)`` scores, differentiable via STE."""
    h = T.as_tensor(h)
    D = h.shape[-1]
    own = T.sign_ste(h)  # (..., N, D)
    pair = T.sign_ste(T.add(T.reshape(h, h.shape[:-1] + (1, D)),
                            T.reshape(h, h.shape[:-2] + (1,) + h.shape[-2:])))  # (..., N, N, D)
    own_b = T.reshape(own, own.shape[:-1] + (1, D))
    return T.scale(T.tsum(T.mul(own_b, pair), axis=-1), 1.0 / D)


def relation_tensor_dense(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h)
    # ternary int8 keeps the dot an exact integer whatever the input dtype
    own = vsa.bipolarize(h).astype(np.int8)
    pair = vsa.bipolarize(h[..., :, None, :] + h[..., None, :, :]).astype(np.int8)
    return vsa.bipolar_cosine(own[..., :, None, :], pair)


def packed_operands(h: np.ndarray):
    """Packed ``sign(h_i)`` (``(..., N, W)``) and ``sign(h_i + h_j)`` (``(..., N, N, W)``)."""
    h = np.asarray(h)
    own = vsa.pack(vsa.bipolarize(h).astype(np.int8))
    pair = vsa.pack(vsa.bipolarize(h[..., :, None, :] + h[..., None, :, :]).astype(np.int8))
    return own, pair


@numba.njit(cache=True, nogil=True)
def _popcount64(x):
    # SWAR popcount; LLVM lowers it to a native popcnt instruction
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@numba.njit(cache=True, nogil=True)
def _score_kernel(own_w, own_z, pair_w, pair_z, valid, out):
    """``out[b, i, j] = <own[b, i], pair[b, i, j]>`` over packed ternary words."""
    B, N, M, W = pair_w.shape
    for b in range(B):
        for i in range(N):
            for j in range(M):
                both = np.uint64(0)
                diff = np.uint64(0)
                for w in range(W):
                    nz = ~(own_z[b, i, w] | pair_z[b, i, j, w]) & valid[w]
                    both += _popcount64(nz)
                    diff += _popcount64((own_w[b, i, w] ^ pair_w[b, i, j, w]) & nz)
                out[b, i, j] = np.int64(both) - 2 * np.int64(diff)
    return out


def packed_dots(own: vsa.PackedBipolar, pair: vsa.PackedBipolar) -> np.ndarray:
    """Integer numerators ``<sign(h_i), sign(h_i + h_j)>`` from packed operands."""
    lead, (N, W) = own.words.shape[:-2], own.words.shape[-2:]
    if pair.words.shape != lead + (N, N, W) or pair.dim != own.dim:
        raise ShapeError("packed_scores", own.words.shape, pair.words.shape)
    B = int(np.prod(lead, dtype=np.int64))
    out = np.empty((B, N, N), dtype=np.int64)
    _score_kernel(own.words.reshape(B, N, W), own.zero_mask.reshape(B, N, W),
                  pair.words.reshape(B, N, N, W), pair.zero_mask.reshape(B, N, N, W),
                  vsa._valid_mask(own.dim), out)
    return out.reshape(lead + (N, N))


def packed_scores(own: vsa.PackedBipolar, pair: vsa.PackedBipolar) -> np.ndarray:
    return packed_dots(own, pair) / own.dim


def relation_tensor_packed(h: np.ndarray) -> np.ndarray:
    return packed_scores(*packed_operands(h))


def normalize(R, mask=None, temperature: float = 1.0) -> T.Tensor:
    """Row softmax. ``mask`` (broadcastable to R, True = keep) drops padded keys."""
    R = T.as_tensor(R)
    if temperature != 1.0:
        R = T.scale(R, 1.0 / temperature)
    return T.softmax(R, axis=-1, mask=mask)


def mix(R_bar, h) -> T.Tensor:
    """``out[i] = sum_j R_bar[i, j] h[j]``."""
    R_bar, h = T.as_tensor(R_bar), T.as_tensor(h)
    if R_bar.shape[-1] != h.shape[-2] or R_bar.shape[-2] != h.shape[-2]:
        raise ShapeError("mix", R_bar.shape, h.shape)
    return T.matmul(R_bar, h)


def key_mask(lengths, n):
    """Boolean ``(B, 1, n)`` mask that is True on real (non-padded) positions."""
    lengths = np.asarray(lengths)
    return (np.arange(n)[None, :] < lengths[:, None])[:, None, :]
