"""Learnable full-convolution map from F-dim objects to D-dim hypervectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, SequenceLengthError, ShapeError
from .nn import Module


@dataclass
class EncoderConfig:
    F: int
    D: int = 1024
    N_max: int = 2
    shared_basis: bool = False

    def validate(self):
        if not self.D > self.F >= 1:
            raise ConfigError(f"need D > F >= 1, got F={self.F}, D={self.D}")
        if self.N_max < 1:
            raise ConfigError("N_max must be at least 1")


class HDEncoder(Module):
    """Row ``i`` of a sequence is convolved with basis kernel ``i``.

    Each kernel has length ``D - F + 1`` so the full convolution of an
    F-vector has exactly ``D`` outputs. With ``shared_basis`` a single kernel
    serves every position.
    """

    def __init__(self, config: EncoderConfig, rng, dtype=np.float64):
        config.validate()
        self.config = config
        L = config.D - config.F + 1
        n = 1 if config.shared_basis else config.N_max
        self.basis = T.parameter(rng.normal(0.0, 1.0 / np.sqrt(config.F), size=(n, L)).astype(dtype))

    def kernels(self, n):
        if n > self.config.N_max:
            raise SequenceLengthError(f"sequence length {n} exceeds N_max={self.config.N_max}")
        if self.config.shared_basis:
            return self.basis[0]
        return self.basis[:n]

    def encode_object(self, o, i):
        if not 0 <= i < self.config.N_max:
            raise SequenceLengthError(f"position {i} outside [0, {self.config.N_max})")
        k = self.basis[0] if self.config.shared_basis else self.basis[i]
        return T.full_conv(o, k)

    def forward(self, objects):
        """``(..., N, F)`` objects to ``(..., N, D)`` hypervectors."""
        objects = T.as_tensor(objects)
        if objects.shape[-1] != self.config.F:
            raise ShapeError("hd_encoder", objects.shape, (self.config.F,), "last axis must equal F")
        return T.full_conv(objects, self.kernels(objects.shape[-2]))

    encode_sequence = forward
