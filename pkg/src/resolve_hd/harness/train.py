"""Mini-batch training and evaluation for the three task kinds."""
from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..baselines import shift_right
from ..errors import TrainingDivergedError
from ..optim import make_optimizer
from ..tasks import element_wise_accuracy, full_sequence_accuracy


def task_kind(task):
    return {"pairwise": "binary", "mnist_math": "multiclass", "sorting": "seq2seq"}[task]


def loss_fn(model, X, Y, kind):
    if kind == "binary":
        return T.bce_with_logits(model(X)[:, 0], Y)
    if kind == "multiclass":
        return T.cross_entropy(model(X), Y)
    start = model.decoder.start_token
    return T.cross_entropy(model(X, shift_right(Y, start)), Y)


def fit(model, X, Y, kind, opt_config, epochs, batch_size, rng, on_epoch=None):
    """Train in place; returns the mean training loss of every epoch.

    ``on_epoch(epoch, mean_loss)`` runs after each epoch (1-based).
    Raises TrainingDivergedError on a non-finite loss.
    """
    opt = make_optimizer(model.parameters(), opt_config)
    X = X.astype(model_dtype(model))
    history = []
    for epoch in range(1, epochs + 1):
        model.train()
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), batch_size):
            b = order[start:start + batch_size]
            loss = loss_fn(model, X[b], Y[b], kind)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDivergedError(f"non-finite loss {value} at epoch {epoch}")
            opt.zero_grad()
            T.backward(loss)
            opt.step()
            total += value * len(b)
        history.append(total / len(X))
        if on_epoch is not None:
            on_epoch(epoch, history[-1])
    return history


def model_dtype(model):
    return model.parameters()[0].dtype


def predict(model, X, kind, batch_size=512):
    model.eval()
    X = X.astype(model_dtype(model))
    out = []
    with T.no_grad():
        for start in range(0, len(X), batch_size):
            xb = X[start:start + batch_size]
            if kind == "seq2seq":
                out.append(model.generate(xb, xb.shape[1]))
            elif kind == "binary":
                out.append((model(xb).data[:, 0] > 0).astype(np.int64))
            else:
                out.append(model(xb).data.argmax(-1))
    return np.concatenate(out)


def evaluate(model, X, Y, kind, batch_size=512):
    """Metric name -> value on (X, Y)."""
    pred = predict(model, X, kind, batch_size)
    with T.no_grad():
        model.eval()
        losses = [loss_fn(model, X[s:s + batch_size].astype(model_dtype(model)),
                          Y[s:s + batch_size], kind).item() * len(X[s:s + batch_size])
                  for s in range(0, len(X), batch_size)]
    metrics = {"loss": float(np.sum(losses) / len(X))}
    if kind == "seq2seq":
        metrics["element_accuracy"] = element_wise_accuracy(pred, Y)
        metrics["sequence_accuracy"] = full_sequence_accuracy(pred, Y)
        metrics["accuracy"] = metrics["element_accuracy"]
    else:
        metrics["accuracy"] = float((pred == Y).mean())
    return metrics
