"""Checkpoint container (format ``resolve-hd-checkpoint``, version 1).

A checkpoint is a numpy ``.npz`` archive. The entry ``__header__`` holds a
UTF-8 JSON document::

    {"format": "resolve-hd-checkpoint", "version": 1,
     "model_config": {...}, "extra": {...},
     "arrays": {"<name>": {"shape": [...], "dtype": "float32", "kind": "param"}}}

Every other entry is one named array: trainable parameters under their
dotted module path (``resolve.encoder.basis``) and non-trainable buffers
such as batch-norm running statistics (``kind`` = ``"buffer"``).
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .resolve import ModelConfig, build_model

FORMAT = "resolve-hd-checkpoint"
VERSION = 1


def save_checkpoint(path, model, config: ModelConfig, extra=None):
    arrays, spec = {}, {}
    for kind, items in (("param", ((n, p.data) for n, p in model.named_parameters())),
                        ("buffer", model.buffers())):
        for name, arr in items:
            arrays[name] = arr
            spec[name] = {"shape": list(arr.shape), "dtype": str(arr.dtype), "kind": kind}
    header = {"format": FORMAT, "version": VERSION, "model_config": config.to_dict(),
              "extra": extra or {}, "arrays": spec}
    blob = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    with open(path, "wb") as f:
        np.savez(f, __header__=blob, **arrays)
    return Path(path)


def read_header(path):
    with np.load(path) as z:
        header = json.loads(z["__header__"].tobytes().decode())
    if header.get("format") != FORMAT:
        raise ConfigError(f"{path}: not a {FORMAT} file")
    if header.get("version") != VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint version {header.get('version')}")
    return header


def load_checkpoint(path):
    """Rebuild the model from the header config and copy every array back in."""
    header = read_header(path)
    config = ModelConfig.from_dict(header["model_config"])
    model = build_model(config)
    params = dict(model.named_parameters())
    buffers = dict(model.buffers())
    with np.load(path) as z:
        for name, meta in header["arrays"].items():
            target = params[name].data if meta["kind"] == "param" else buffers[name]
            if list(target.shape) != meta["shape"]:
                raise ConfigError(f"{name}: checkpoint shape {meta['shape']} != model {list(target.shape)}")
            target[...] = z[name]
    return model, config, header
