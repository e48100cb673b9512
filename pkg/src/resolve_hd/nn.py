"""Small module system and generic layers on top of :mod:`resolve_hd.tensor`."""
from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    training = True

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def modules(self):
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def buffers(self, prefix=""):
        """Non-trainable arrays that belong in a checkpoint (e.g. running stats)."""
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, np.ndarray):
                yield full, value
            elif isinstance(value, Module):
                yield from value.buffers(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.buffers(f"{full}.{i}.")

    def train(self, mode=True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def glorot_uniform(rng, fan_in, fan_out, dtype):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


class Linear(Module):
    def __init__(self, n_in, n_out, rng, dtype=np.float64, bias=True):
        self.weight = T.parameter(glorot_uniform(rng, n_in, n_out, dtype))
        self.bias = T.parameter(np.zeros(n_out, dtype=dtype)) if bias else None

    def forward(self, x):
        y = x @ self.weight
        return y if self.bias is None else y + self.bias


class Dropout(Module):
    def __init__(self, p, rng):
        self.p = p
        self.rng = rng

    def forward(self, x):
        return T.dropout(x, self.p, self.rng, self.training)


class LayerNorm(Module):
    def __init__(self, dim, dtype=np.float64, eps=1e-6):
        self.gamma = T.parameter(np.ones(dim, dtype=dtype))
        self.beta = T.parameter(np.zeros(dim, dtype=dtype))
        self.eps = eps

    def forward(self, x):
        return T.layer_norm(x, self.gamma, self.beta, self.eps)


class BatchNorm(Module):
    def __init__(self, dim, dtype=np.float64, momentum=0.9, eps=1e-3):
        self.gamma = T.parameter(np.ones(dim, dtype=dtype))
        self.beta = T.parameter(np.zeros(dim, dtype=dtype))
        self.running_mean = np.zeros(dim, dtype=dtype)
        self.running_var = np.ones(dim, dtype=dtype)
        self.momentum = momentum
        self.eps = eps

    def forward(self, x):
        return T.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                            self.training, self.momentum, self.eps)


class Embedding(Module):
    def __init__(self, n, dim, rng, dtype=np.float64):
        self.table = T.parameter(rng.uniform(-0.05, 0.05, size=(n, dim)).astype(dtype))

    def forward(self, ids):
        return T.take_rows(self.table, ids)


class MLP(Module):
    """Dense layers with ReLU between them; the last layer is linear."""

    def __init__(self, sizes, rng, dtype=np.float64, dropout=0.0):
        self.layers = [Linear(a, b, rng, dtype) for a, b in zip(sizes[:-1], sizes[1:])]
        self.drop = Dropout(dropout, rng)

    def forward(self, x):
        for layer in self.layers[:-1]:
            x = self.drop(T.relu(layer(x)))
        return self.layers[-1](x)


def sinusoidal_positions(n, dim, dtype=np.float64):
    pos = np.arange(n)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    out = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return out.astype(dtype)
