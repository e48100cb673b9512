"""Adam and AdamW over a list of parameter tensors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class OptimizerConfig:
    kind: str = "adamw"
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    weight_decay: float = 0.004

    def validate(self):
        if self.kind not in ("adam", "adamw"):
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("betas must lie in [0, 1)")
        if self.eps <= 0 or self.weight_decay < 0:
            raise ConfigError("eps must be positive and weight_decay non-negative")


class Adam:
    """Bias-corrected Adam.

    With ``decoupled=True`` (AdamW) the decay ``-lr * weight_decay * theta`` is
    applied directly to the parameters; otherwise it is folded into the
    gradient as an L2 penalty.
    """

    decoupled = False

    def __init__(self, params, config: OptimizerConfig):
        config.validate()
        self.params = list(params)
        self.config = config
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, grads=None):
        c = self.config
        self.t += 1
        bc1 = 1 - c.beta1 ** self.t
        bc2 = 1 - c.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad if grads is None else grads[i]
            if g is None:
                continue
            if c.weight_decay and not self.decoupled:
                g = g + c.weight_decay * p.data
            self.m[i] *= c.beta1
            self.m[i] += (1 - c.beta1) * g
            self.v[i] *= c.beta2
            self.v[i] += (1 - c.beta2) * g * g
            if c.weight_decay and self.decoupled:
                p.data -= c.lr * c.weight_decay * p.data
            p.data -= c.lr * (self.m[i] / bc1) / (np.sqrt(self.v[i] / bc2) + c.eps)


class AdamW(Adam):
    decoupled = True


def make_optimizer(params, config: OptimizerConfig) -> Adam:
    config.validate()
    return (AdamW if config.kind == "adamw" else Adam)(params, config)


def optimizer_step(params, grads, config: OptimizerConfig, state: Adam | None = None) -> Adam:
    """Apply one update to ``params`` from explicit ``grads``; returns the optimizer state."""
    opt = state or make_optimizer(params, config)
    opt.step(grads)
    return opt
