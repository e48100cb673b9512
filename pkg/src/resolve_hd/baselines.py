"""Standard attention blocks: self-attention, relational cross-attention,
transformer encoder/decoder stacks and the two transformer baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .nn import MLP, BatchNorm, Dropout, Embedding, LayerNorm, Linear, Module, sinusoidal_positions


@dataclass
class AttentionBlockConfig:
    d_model: int = 64
    n_heads: int = 2
    d_k: int | None = None
    d_ff: int = 64
    n_layers: int = 1
    dropout: float = 0.1
    causal: bool = False

    def validate(self):
        if self.d_model % self.n_heads:
            raise ConfigError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.n_layers < 0 or self.d_ff < 1:
            raise ConfigError("n_layers must be >= 0 and d_ff >= 1")

    @property
    def head_dim(self):
        return self.d_k or self.d_model // self.n_heads


def _split_heads(x, n_heads):
    B, N, hd = x.shape
    return T.swapaxes(T.reshape(x, (B, N, n_heads, hd // n_heads)), 1, 2)  # (B, h, N, d)


def _merge_heads(x):
    B, h, N, d = x.shape
    return T.reshape(T.swapaxes(x, 1, 2), (B, N, h * d))


def _attend(q, k, v, n_heads, causal=False, key_mask=None):
    """Scaled dot-product attention over ``(B, N, h*d)`` projections.

    Returns the concatenated head outputs and the ``(B, h, Nq, Nk)`` weights.
    """
    q, k, v = _split_heads(q, n_heads), _split_heads(k, n_heads), _split_heads(v, n_heads)
    d_k = q.shape[-1]
    scores = T.scale(T.matmul(q, T.swapaxes(k, -1, -2)), 1.0 / np.sqrt(d_k))
    nq, nk = scores.shape[-2:]
    mask = None
    if causal:
        mask = np.tril(np.ones((nq, nk), dtype=bool))
    if key_mask is not None:
        km = np.asarray(key_mask, dtype=bool)[:, None, None, :]
        mask = km if mask is None else (mask & km)
    weights = T.softmax(scores, axis=-1, mask=mask)
    return _merge_heads(T.matmul(weights, v)), weights


def _batched(x):
    x = T.as_tensor(x)
    return (x, False) if x.ndim == 3 else (T.reshape(x, (1,) + x.shape), True)


def self_attention(x, W_q, W_k, W_v, n_heads=1, causal=False, return_weights=False):
    """``softmax(Q K^T / sqrt(d_k)) V`` with heads concatenated; ``x`` is ``(N, F)`` or ``(B, N, F)``."""
    x, squeeze = _batched(x)
    for W in (W_q, W_k, W_v):
        if T.as_tensor(W).shape[0] != x.shape[-1]:
            raise ShapeError("self_attention", x.shape, T.as_tensor(W).shape)
    out, w = _attend(x @ W_q, x @ W_k, x @ W_v, n_heads, causal)
    if squeeze:
        out = T.reshape(out, out.shape[1:])
    return (out, w) if return_weights else out


def relational_cross_attention(objects, symbols, W_q, W_k, W_v, n_heads=1, return_weights=False):
    """Scores come from the objects; the mixed values are projected symbols."""
    objects, squeeze = _batched(objects)
    symbols = T.as_tensor(symbols)
    if symbols.shape[-2] != objects.shape[-2]:
        raise ShapeError("relational_cross_attention", objects.shape, symbols.shape)
    v = symbols @ W_v
    if v.ndim == 2:
        v = T.add(T.reshape(v, (1,) + v.shape), np.zeros((objects.shape[0], 1, 1), dtype=v.dtype))
    out, w = _attend(objects @ W_q, objects @ W_k, v, n_heads)
    if squeeze:
        out = T.reshape(out, out.shape[1:])
    return (out, w) if return_weights else out


class MultiHeadAttention(Module):
    def __init__(self, d_in, d_model, n_heads, rng, dtype=np.float64, d_k=None):
        d_k = d_k or d_model // n_heads
        self.n_heads = n_heads
        self.q = Linear(d_in, n_heads * d_k, rng, dtype, bias=False)
        self.k = Linear(d_in, n_heads * d_k, rng, dtype, bias=False)
        self.v = Linear(d_in, n_heads * d_k, rng, dtype, bias=False)
        self.o = Linear(n_heads * d_k, d_model, rng, dtype)

    def forward(self, x, memory=None, causal=False, key_mask=None):
        memory = x if memory is None else memory
        out, _ = _attend(self.q(x), self.k(memory), self.v(memory), self.n_heads, causal, key_mask)
        return self.o(out)


class FeedForward(Module):
    def __init__(self, d_model, d_ff, rng, dtype=np.float64):
        self.inner = Linear(d_model, d_ff, rng, dtype)
        self.outer = Linear(d_ff, d_model, rng, dtype)

    def forward(self, x):
        return self.outer(T.relu(self.inner(x)))


class EncoderLayer(Module):
    """Post-norm block: self-attention then feed-forward, each with a residual."""

    def __init__(self, cfg: AttentionBlockConfig, rng, dtype=np.float64):
        self.attn = MultiHeadAttention(cfg.d_model, cfg.d_model, cfg.n_heads, rng, dtype, cfg.d_k)
        self.ff = FeedForward(cfg.d_model, cfg.d_ff, rng, dtype)
        self.norm1 = LayerNorm(cfg.d_model, dtype)
        self.norm2 = LayerNorm(cfg.d_model, dtype)
        self.drop = Dropout(cfg.dropout, rng)

    def forward(self, x, key_mask=None):
        x = self.norm1(x + self.drop(self.attn(x, key_mask=key_mask)))
        return self.norm2(x + self.drop(self.ff(x)))


class DecoderLayer(Module):
    def __init__(self, cfg: AttentionBlockConfig, rng, dtype=np.float64):
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.d_model, cfg.n_heads, rng, dtype, cfg.d_k)
        self.cross_attn = MultiHeadAttention(cfg.d_model, cfg.d_model, cfg.n_heads, rng, dtype, cfg.d_k)
        self.ff = FeedForward(cfg.d_model, cfg.d_ff, rng, dtype)
        self.norm1 = LayerNorm(cfg.d_model, dtype)
        self.norm2 = LayerNorm(cfg.d_model, dtype)
        self.norm3 = LayerNorm(cfg.d_model, dtype)
        self.drop = Dropout(cfg.dropout, rng)

    def forward(self, y, memory, memory_mask=None):
        y = self.norm1(y + self.drop(self.self_attn(y, causal=True)))
        y = self.norm2(y + self.drop(self.cross_attn(y, memory, key_mask=memory_mask)))
        return self.norm3(y + self.drop(self.ff(y)))


class AttentionalEncoder(Module):
    """Linear object embedding, optional batch norm, positions, encoder layers."""

    def __init__(self, F, cfg: AttentionBlockConfig, rng, dtype=np.float64, batchnorm=False,
                 positional=True):
        cfg.validate()
        self.embed = Linear(F, cfg.d_model, rng, dtype)
        self.norm = BatchNorm(cfg.d_model, dtype) if batchnorm else None
        self.positional = positional
        self.d_model = cfg.d_model
        self.layers = [EncoderLayer(cfg, rng, dtype) for _ in range(cfg.n_layers)]
        self.drop = Dropout(cfg.dropout, rng)

    def forward(self, x, key_mask=None):
        x = T.as_tensor(x)
        h = self.embed(x)
        if self.norm is not None:
            h = self.norm(h)
        if self.positional:
            h = h + sinusoidal_positions(x.shape[-2], self.d_model, h.dtype)
        h = self.drop(h)
        for layer in self.layers:
            h = layer(h, key_mask)
        return h


class AttentionalDecoder(Module):
    """Token embedding, positions, decoder layers and the output projection.

    Input token ``vocab`` is the start symbol; outputs range over ``vocab`` classes.
    """

    def __init__(self, vocab, cfg: AttentionBlockConfig, rng, dtype=np.float64):
        cfg.validate()
        self.vocab = vocab
        self.d_model = cfg.d_model
        self.embed = Embedding(vocab + 1, cfg.d_model, rng, dtype)
        self.layers = [DecoderLayer(cfg, rng, dtype) for _ in range(cfg.n_layers)]
        self.out = Linear(cfg.d_model, vocab, rng, dtype)
        self.drop = Dropout(cfg.dropout, rng)

    @property
    def start_token(self):
        return self.vocab

    def forward(self, tgt_in, memory, memory_mask=None):
        tgt_in = np.asarray(tgt_in)
        y = T.scale(self.embed(tgt_in), np.sqrt(self.d_model))
        y = self.drop(y + sinusoidal_positions(tgt_in.shape[-1], self.d_model, y.dtype))
        for layer in self.layers:
            y = layer(y, memory, memory_mask)
        return self.out(y)


def greedy_decode(decoder: AttentionalDecoder, memory, length, memory_mask=None):
    """Argmax decoding of ``length`` tokens given a fixed memory."""
    B = memory.shape[0]
    seq = np.full((B, 1), decoder.start_token, dtype=np.int64)
    with T.no_grad():
        for _ in range(length):
            logits = decoder(seq, memory, memory_mask)
            nxt = logits.data[:, -1].argmax(-1)
            seq = np.concatenate([seq, nxt[:, None]], axis=1)
    return seq[:, 1:]


def shift_right(targets, start_token):
    targets = np.asarray(targets)
    start = np.full(targets.shape[:-1] + (1,), start_token, dtype=targets.dtype)
    return np.concatenate([start, targets[..., :-1]], axis=-1)


class TransformerSeq2Seq(Module):
    """Encoder over object vectors, decoder over output tokens."""

    def __init__(self, F, vocab, enc: AttentionBlockConfig, dec: AttentionBlockConfig, rng,
                 dtype=np.float64):
        self.encoder = AttentionalEncoder(F, enc, rng, dtype)
        self.decoder = AttentionalDecoder(vocab, dec, rng, dtype)

    def encode(self, src):
        return self.encoder(src), None

    def forward(self, src, tgt_in):
        memory, mask = self.encode(src)
        return self.decoder(tgt_in, memory, mask)

    def generate(self, src, length):
        self.eval()
        with T.no_grad():
            memory, mask = self.encode(src)
        return greedy_decode(self.decoder, memory, length, mask)


class TransformerClassifier(Module):
    """Encoder layers, flatten, MLP head; outputs class logits."""

    def __init__(self, F, n_objects, enc: AttentionBlockConfig, head_hidden, n_outputs, rng,
                 dtype=np.float64, head_dropout=0.0):
        self.encoder = AttentionalEncoder(F, enc, rng, dtype)
        self.head = MLP([n_objects * enc.d_model, *head_hidden, n_outputs], rng, dtype, head_dropout)

    def forward(self, x):
        h = self.encoder(x)
        return self.head(T.reshape(h, (h.shape[0], -1)))


def transformer_seq2seq(config) -> TransformerSeq2Seq:
    from .resolve import build_model  # one dispatcher for every model kind

    if config.model != "transformer" or config.variant not in ("c", "d"):
        raise ConfigError("transformer_seq2seq needs model='transformer' and a sequence variant")
    return build_model(config)
