"""Flat ``key = value`` run configuration with typed validation."""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..errors import ConfigError
from ..optim import OptimizerConfig
from ..resolve import ModelConfig

TASKS = ("pairwise", "sorting", "mnist_math")


@dataclass
class RunConfig:
    run_id: str = "run"
    task: str = "pairwise"
    model: str = "resolve"
    variant: str = "a"
    train_sizes: list[int] = field(default_factory=lambda: [210])
    n_seeds: int = 5
    seeds: list[int] = field(default_factory=list)
    epochs: int = 100
    batch_size: int = 128
    optimizer: str = "adamw"
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    weight_decay: float = 0.004
    D: int = 1024
    d_model: int = 64
    n_heads: int = 2
    n_enc_layers: int = 1
    n_dec_layers: int = 4
    d_ff: int = 64
    dropout: float = 0.1
    head_hidden: list[int] = field(default_factory=lambda: [32])
    batchnorm: bool = True
    shared_basis: bool = False
    temperature: float = 1.0
    dtype: str = "float32"
    eval_every: int = 0
    early_stopping: bool = False
    workers: int = 1
    out_dir: str = "runs"
    # task parameters
    seq_len: int = 6
    n_sequences: int = 1500
    n_pairs: int = 10000
    mnist_images: str = ""
    mnist_labels: str = ""
    save_checkpoints: bool = True

    @property
    def seed_list(self):
        return list(self.seeds) if self.seeds else list(range(self.n_seeds))

    def optimizer_config(self):
        return OptimizerConfig(self.optimizer, self.lr, self.beta1, self.beta2, self.eps,
                               self.weight_decay)

    def model_config(self, seed=0):
        if self.task == "pairwise":
            F, N, n_out, vocab = 32, 2, 1, 1
        elif self.task == "mnist_math":
            F, N, n_out, vocab = 784, 2, 28, 1
        else:
            F, N, n_out, vocab = 12, self.seq_len, 1, self.seq_len
        return ModelConfig(
            model=self.model, variant=self.variant, F=F, D=self.D, N_max=N, d_model=self.d_model,
            n_heads=self.n_heads, n_enc_layers=self.n_enc_layers, n_dec_layers=self.n_dec_layers,
            d_ff=self.d_ff, dropout=self.dropout, head_hidden=tuple(self.head_hidden),
            n_outputs=n_out, tgt_vocab=vocab, batchnorm=self.batchnorm,
            shared_basis=self.shared_basis, temperature=self.temperature, dtype=self.dtype,
            seed=seed, optimizer=self.optimizer_config())

    def validate(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if not self.run_id or any(c in self.run_id for c in "/\\"):
            raise ConfigError(f"invalid run_id {self.run_id!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not self.train_sizes or min(self.train_sizes) < 1:
            raise ConfigError("train_sizes must be a non-empty list of positive sizes")
        if not self.seed_list:
            raise ConfigError("need at least one seed")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        sequence = self.variant in ("c", "d")
        if (self.task == "sorting") != sequence:
            raise ConfigError(f"task {self.task!r} is incompatible with variant {self.variant!r}")
        if self.task == "mnist_math" and not (self.mnist_images and self.mnist_labels):
            raise ConfigError("mnist_math needs mnist_images and mnist_labels paths")
        if self.task == "sorting" and self.seq_len < 2:
            raise ConfigError("seq_len must be at least 2")
        self.model_config().validate()
        return self

    # -- text round-trip -------------------------------------------------
    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, overrides=None):
        values = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}: expected key = value, got {line!r}")
            k, v = line.split("=", 1)
            values[k.strip()] = v.strip()
        for item in overrides or []:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            k, v = item.split("=", 1)
            values[k.strip()] = v.strip()
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values):
        hints = typing.get_type_hints(cls)
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for k, v in values.items():
            if k not in known:
                raise ConfigError(f"unknown config key {k!r}")
            kwargs[k] = _parse(k, v, hints[k])
        return cls(**kwargs)

    @classmethod
    def load(cls, path, overrides=None):
        return cls.from_text(Path(path).read_text(), overrides)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _parse(key, raw, hint):
    try:
        if hint is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        if typing.get_origin(hint) is list:
            (inner,) = typing.get_args(hint)
            return [inner(x) for x in raw.split(",") if x.strip()]
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(hint, '__name__', hint)}") from None
