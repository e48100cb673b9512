"""The RESOLVE block and the four model variants built around it.

Variants:
  a  RESOLVE -> flatten -> MLP head
  b  attentional encoder -> RESOLVE -> flatten -> MLP head
  c  attentional encoder (batch norm) -> RESOLVE -> attentional decoder
  d  as c, with the decoder cross-attending to encoder and RESOLVE outputs
     concatenated along the sequence axis
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import hd_attention as hda
from . import tensor as T
from .baselines import (AttentionalDecoder, AttentionalEncoder, AttentionBlockConfig,
                        TransformerClassifier, TransformerSeq2Seq, greedy_decode)
from .errors import ConfigError, SequenceLengthError
from .hd_encoder import EncoderConfig, HDEncoder
from .nn import MLP, Dropout, Module
from .optim import OptimizerConfig

VARIANTS = ("a", "b", "c", "d")
MODELS = ("resolve", "transformer")


@dataclass
class ModelConfig:
    model: str = "resolve"
    variant: str = "a"
    F: int = 32
    D: int = 1024
    N_max: int = 2
    d_model: int = 64
    n_heads: int = 2
    d_k: int | None = None
    n_enc_layers: int = 1
    n_dec_layers: int = 4
    d_ff: int = 64
    dropout: float = 0.1
    head_hidden: tuple = (32,)
    n_outputs: int = 1
    tgt_vocab: int = 6
    batchnorm: bool = True
    shared_basis: bool = False
    temperature: float = 1.0
    dtype: str = "float32"
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    @property
    def sequence_output(self):
        return self.variant in ("c", "d")

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if min(self.F, self.D, self.N_max, self.d_model, self.n_outputs, self.tgt_vocab) < 1:
            raise ConfigError("dimensions must be positive")
        resolve_in = self.F if self.variant == "a" else self.d_model
        if self.model == "resolve" and self.D <= resolve_in:
            raise ConfigError(f"D={self.D} must exceed the RESOLVE input dim {resolve_in}")
        self.block(self.n_enc_layers).validate()
        self.optimizer.validate()

    def block(self, n_layers):
        return AttentionBlockConfig(self.d_model, self.n_heads, self.d_k, self.d_ff, n_layers,
                                    self.dropout)

    def to_dict(self):
        d = asdict(self)
        d["head_hidden"] = list(self.head_hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["optimizer"] = OptimizerConfig(**d.get("optimizer", {}))
        d["head_hidden"] = tuple(d.get("head_hidden", (32,)))
        return cls(**d)


class ResolveLayer(Module):
    """HD-encode objects and symbols, HD-attend, bind, project to ``d_model``."""

    def __init__(self, F, D, N_max, d_model, rng, dtype=np.float64, dropout=0.0,
                 shared_basis=False, temperature=1.0):
        self.encoder = HDEncoder(EncoderConfig(F, D, N_max, shared_basis), rng, dtype)
        self.symbols = T.parameter(rng.normal(size=(N_max, F)).astype(dtype))
        self.W_down = T.parameter(rng.normal(0.0, 1.0 / np.sqrt(D), size=(D, d_model)).astype(dtype))
        self.drop = Dropout(dropout, rng)
        self.temperature = temperature
        self.N_max = N_max

    def forward(self, objects, key_mask=None, return_parts=False):
        objects = T.as_tensor(objects)
        N = objects.shape[-2]
        if N > self.N_max:
            raise SequenceLengthError(f"sequence length {N} exceeds N_max={self.N_max}")
        h_o = self.encoder(objects)
        R = hda.relation_tensor(h_o)
        mask = None if key_mask is None else np.asarray(key_mask, dtype=bool)[..., None, :]
        R_bar = hda.normalize(R, mask, self.temperature)
        h_eo = hda.mix(R_bar, h_o)
        h_s = self.encoder(self.symbols[:N])
        out_hd = T.mul(h_s, h_eo)
        out = self.drop(out_hd @ self.W_down)
        if return_parts:
            return out, dict(h_o=h_o, R=R, R_bar=R_bar, h_eo=h_eo, h_s=h_s, out_hd=out_hd)
        return out


class ResolveClassifier(Module):
    """Variants a and b."""

    def __init__(self, cfg: ModelConfig, rng, dtype):
        self.front = None
        F = cfg.F
        if cfg.variant == "b":
            self.front = AttentionalEncoder(cfg.F, cfg.block(cfg.n_enc_layers), rng, dtype)
            F = cfg.d_model
        self.resolve = ResolveLayer(F, cfg.D, cfg.N_max, cfg.d_model, rng, dtype, cfg.dropout,
                                    cfg.shared_basis, cfg.temperature)
        self.head = MLP([cfg.N_max * cfg.d_model, *cfg.head_hidden, cfg.n_outputs], rng, dtype)

    def forward(self, x):
        h = x if self.front is None else self.front(x)
        h = self.resolve(h)
        return self.head(T.reshape(h, (h.shape[0], -1)))


class ResolveSeq2Seq(Module):
    """Variants c and d."""

    def __init__(self, cfg: ModelConfig, rng, dtype):
        self.encoder = AttentionalEncoder(cfg.F, cfg.block(cfg.n_enc_layers), rng, dtype,
                                          batchnorm=cfg.batchnorm)
        self.resolve = ResolveLayer(cfg.d_model, cfg.D, cfg.N_max, cfg.d_model, rng, dtype,
                                    cfg.dropout, cfg.shared_basis, cfg.temperature)
        self.decoder = AttentionalDecoder(cfg.tgt_vocab, cfg.block(cfg.n_dec_layers), rng, dtype)
        self.skip = cfg.variant == "d"

    def encode(self, src, key_mask=None):
        enc = self.encoder(src, key_mask)
        mem = self.resolve(enc, key_mask)
        mask = key_mask
        if self.skip:
            mem = T.concat([enc, mem], axis=1)
            if key_mask is not None:
                mask = np.concatenate([key_mask, key_mask], axis=1)
        return mem, mask

    def forward(self, src, tgt_in, key_mask=None):
        memory, mask = self.encode(src, key_mask)
        return self.decoder(tgt_in, memory, mask)

    def generate(self, src, length, key_mask=None):
        self.eval()
        with T.no_grad():
            memory, mask = self.encode(src, key_mask)
        return greedy_decode(self.decoder, memory, length, mask)


def assemble(config: ModelConfig, rng=None):
    """Build the RESOLVE model for ``config.variant``."""
    config.validate()
    if config.model != "resolve":
        raise ConfigError("assemble builds RESOLVE models; use build_model for baselines")
    rng = rng or np.random.default_rng(config.seed)
    dtype = np.dtype(config.dtype)
    if config.sequence_output:
        return ResolveSeq2Seq(config, rng, dtype)
    return ResolveClassifier(config, rng, dtype)


def build_model(config: ModelConfig, rng=None):
    """RESOLVE variant or the matching transformer baseline."""
    config.validate()
    if config.model == "resolve":
        return assemble(config, rng)
    rng = rng or np.random.default_rng(config.seed)
    dtype = np.dtype(config.dtype)
    if config.sequence_output:
        return TransformerSeq2Seq(config.F, config.tgt_vocab, config.block(config.n_enc_layers),
                                  config.block(config.n_dec_layers), rng, dtype)
    return TransformerClassifier(config.F, config.N_max, config.block(config.n_enc_layers),
                                 config.head_hidden, config.n_outputs, rng, dtype)
