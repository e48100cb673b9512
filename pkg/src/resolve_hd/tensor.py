"""Dense arrays with reverse-mode differentiation.

A :class:`Tensor` wraps a numpy array. Every primitive below records its
parents and a backward rule when any input requires a gradient, which builds
the graph implicitly (define-by-run). :func:`backward` walks that graph in
reverse topological order.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import GraphError, ShapeError

_GRAD_ENABLED = True
_STE_SURROGATE = False


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


@contextlib.contextmanager
def ste_surrogate():
    """Replace the sign forward by hard-tanh while active.

    Hard-tanh has exactly the straight-through derivative, so finite
    differences of the surrogate check the STE backward rule.
    """
    global _STE_SURROGATE
    prev, _STE_SURROGATE = _STE_SURROGATE, True
    try:
        yield
    finally:
        _STE_SURROGATE = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "op")
    __array_ufunc__ = None  # ndarray <op> Tensor defers to the reflected Tensor method

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None
        self.op = "leaf"

    # -- conveniences -----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    def backward(self):
        return backward(self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, c):
        if not np.isscalar(c):
            raise TypeError("only division by a scalar is supported")
        return scale(self, 1.0 / c)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def parameter(data, name=None, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=True, dtype=dtype, name=name)


def _result(data, parents: Sequence[Tensor], backward_fn: Callable, op: str) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    out.op = op
    return out


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(primitive, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(primitive, a.shape, b.shape) from None


# -- graph traversal ------------------------------------------------------

def _topological(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every trainable leaf.

    Returns a map from each reached leaf to its gradient from this call.
    """
    if loss.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GraphError("loss does not depend on any tensor that requires grad")
    grads = {id(loss): np.ones_like(loss.data)}
    leaves = {}
    for node in reversed(_topological(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            leaves[node] = g
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    return leaves


class Graph:
    """A callable computation with an explicit forward/backward lifecycle."""

    def __init__(self, fn: Callable[..., Tensor]):
        self.fn = fn
        self.output = None
        self.inputs = {}

    def forward(self, **inputs) -> Tensor:
        self.inputs = inputs
        self.output = self.fn(**inputs)
        return self.output

    def backward(self, loss: Tensor | None = None) -> dict[str, np.ndarray]:
        """Gradient for every named trainable input; zeros for inputs the loss never used."""
        if self.output is None:
            raise GraphError("backward called before forward")
        reached = backward(self.output if loss is None else loss)
        return {name: reached.get(t, np.zeros_like(t.data))
                for name, t in self.inputs.items()
                if isinstance(t, Tensor) and t.requires_grad}


# -- elementwise ----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def bw(g):
        return (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        )

    return _result(a.data * b.data, (a, b), bw, "mul")


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = x.data.dtype.type(c)
    return _result(x.data * c, (x,), lambda g: (g * c,), "scale")


def relu(x) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0
    return _result(np.where(pos, x.data, 0), (x,), lambda g: (g * pos,), "relu")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = 0.5 * (1 + np.tanh(0.5 * x.data))
    return _result(y, (x,), lambda g: (g * y * (1 - y),), "sigmoid")


def sign_ste(x) -> Tensor:
    """Sign in the forward pass; straight-through gradient where |x| <= 1."""
    x = as_tensor(x)
    window = np.abs(x.data) <= 1
    y = np.clip(x.data, -1, 1) if _STE_SURROGATE else np.sign(x.data)
    return _result(y, (x,), lambda g: (g * window,), "sign_ste")


def dropout(x, p: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    x = as_tensor(x)
    if not training or p == 0:
        return x
    if not 0 <= p < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / x.dtype.type(1 - p)
    return _result(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


# -- linear algebra -------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul", a.shape, b.shape, "operands need ndim >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape, "batch dims") from None

    def bw(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _result(a.data @ b.data, (a, b), bw, "matmul")


def _toeplitz(w: np.ndarray, n_in: int) -> np.ndarray:
    """Banded matrices T with T[..., k, j] = w[..., j - k] (zero off the band)."""
    L = w.shape[-1]
    out_len = n_in + L - 1
    k = np.arange(n_in)[:, None]
    j = np.arange(out_len)[None, :]
    lag = j - k
    valid = (lag >= 0) & (lag < L)
    T = w[..., np.clip(lag, 0, L - 1)]
    return T * valid.astype(w.dtype)


def full_conv(x, w) -> Tensor:
    """Full 1-D convolution ``y[j] = sum_k x[k] w[j - k]`` along the last axis.

    ``x`` is ``(..., F)``. ``w`` is either a single kernel ``(L,)`` shared by
    every row, or one kernel per row ``(N, L)`` applied to ``x`` of shape
    ``(..., N, F)``. The output has ``F + L - 1`` entries per row.
    """
    x, w = as_tensor(x), as_tensor(w)
    F = x.shape[-1]
    if w.ndim == 1:
        per_row = False
    elif w.ndim == 2:
        if x.ndim < 2 or x.shape[-2] != w.shape[0]:
            raise ShapeError("full_conv", x.shape, w.shape, "one kernel per row expected")
        per_row = True
    else:
        raise ShapeError("full_conv", x.shape, w.shape, "kernel must be 1-D or 2-D")
    L = w.shape[-1]
    D = F + L - 1
    T = _toeplitz(w.data, F)  # (F, D) or (N, F, D)

    if per_row:
        N = w.shape[0]
        lead = x.shape[:-2]
        xt = np.moveaxis(x.data.reshape(-1, N, F), 1, 0)  # (N, M, F)
        y = np.moveaxis(xt @ T, 0, 1).reshape(*lead, N, D)
    else:
        xt = None
        y = x.data @ T

    def bw(g):
        gx = gw = None
        if per_row:
            gt = np.moveaxis(g.reshape(-1, N, D), 1, 0)  # (N, M, D)
            if x.requires_grad:
                gx = np.moveaxis(gt @ np.swapaxes(T, -1, -2), 0, 1).reshape(x.shape)
            if w.requires_grad:
                dT = np.swapaxes(xt, -1, -2) @ gt  # (N, F, D)
                gw = np.zeros_like(w.data)
                for k in range(F):
                    gw += dT[:, k, k:k + L]
        else:
            if x.requires_grad:
                gx = g @ T.T
            if w.requires_grad:
                dT = x.data.reshape(-1, F).T @ g.reshape(-1, D)  # (F, D)
                gw = np.zeros_like(w.data)
                for k in range(F):
                    gw += dT[k, k:k + L]
        return gx, gw

    return _result(y, (x, w), bw, "full_conv")


# -- normalisation and losses ----------------------------------------------

def softmax(x, axis: int = -1, mask=None) -> Tensor:
    """Softmax along ``axis``; entries where ``mask`` is False get weight 0."""
    x = as_tensor(x)
    z = x.data
    if mask is not None:
        z = np.where(mask, z, -np.inf)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _result(y, (x,), bw, "softmax")


def layer_norm(x, gamma, beta, eps: float = 1e-6) -> Tensor:
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mu = x.data.mean(-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + eps)
    xh = xc * inv
    y = xh * gamma.data + beta.data

    def bw(g):
        gxh = g * gamma.data
        gx = inv * (gxh - gxh.mean(-1, keepdims=True) - xh * (gxh * xh).mean(-1, keepdims=True))
        return gx, _unbroadcast(g * xh, gamma.shape), _unbroadcast(g, beta.shape)

    return _result(y, (x, gamma, beta), bw, "layer_norm")


def batch_norm(x, gamma, beta, running_mean, running_var, training: bool,
               momentum: float = 0.9, eps: float = 1e-3) -> Tensor:
    """Normalise over every axis but the last.

    ``running_mean``/``running_var`` are plain arrays updated in place while
    training (``new = momentum * old + (1 - momentum) * batch``).
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    axes = tuple(range(x.ndim - 1))
    if not training:
        inv = 1.0 / np.sqrt(running_var + eps)
        xh = (x.data - running_mean) * inv
        y = xh * gamma.data + beta.data

        def bw_eval(g):
            return g * gamma.data * inv, _unbroadcast(g * xh, gamma.shape), _unbroadcast(g, beta.shape)

        return _result(y, (x, gamma, beta), bw_eval, "batch_norm")

    mu = x.data.mean(axis=axes)
    var = x.data.var(axis=axes)
    running_mean *= momentum
    running_mean += (1 - momentum) * mu
    running_var *= momentum
    running_var += (1 - momentum) * var
    inv = 1.0 / np.sqrt(var + eps)
    xh = (x.data - mu) * inv
    y = xh * gamma.data + beta.data

    def bw(g):
        gxh = g * gamma.data
        gx = inv * (gxh - gxh.mean(axis=axes) - xh * (gxh * xh).mean(axis=axes))
        return gx, _unbroadcast(g * xh, gamma.shape), _unbroadcast(g, beta.shape)

    return _result(y, (x, gamma, beta), bw, "batch_norm")


def cross_entropy(logits, labels, weights=None) -> Tensor:
    """Mean softmax cross-entropy over the last axis of ``logits``.

    ``labels`` holds integer class ids with the shape of ``logits[..., 0]``.
    Optional ``weights`` (same shape as labels) give per-item loss weights;
    the mean is then taken over their sum.
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if labels.shape != logits.shape[:-1]:
        raise ShapeError("cross_entropy", logits.shape, labels.shape)
    z = logits.data - logits.data.max(-1, keepdims=True)
    logz = np.log(np.exp(z).sum(-1, keepdims=True))
    logp = z - logz
    picked = np.take_along_axis(logp, labels[..., None].astype(np.intp), -1)[..., 0]
    w = np.ones_like(picked) if weights is None else np.asarray(weights, dtype=picked.dtype)
    total = w.sum()
    loss = -(picked * w).sum() / total

    def bw(g):
        p = np.exp(logp)
        np.put_along_axis(p, labels[..., None].astype(np.intp),
                          np.take_along_axis(p, labels[..., None].astype(np.intp), -1) - 1, -1)
        return (g * p * (w / total)[..., None],)

    return _result(np.asarray(loss, dtype=logits.dtype), (logits,), bw, "cross_entropy")


def bce_with_logits(logits, targets) -> Tensor:
    """Mean binary cross-entropy of sigmoid(logits) against 0/1 targets."""
    logits = as_tensor(logits)
    t = np.asarray(targets, dtype=logits.dtype)
    if t.shape != logits.shape:
        raise ShapeError("bce_with_logits", logits.shape, t.shape)
    z = logits.data
    loss = (np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))).mean()
    n = z.size

    def bw(g):
        s = 0.5 * (1 + np.tanh(0.5 * z))
        return (g * (s - t) / n,)

    return _result(np.asarray(loss, dtype=logits.dtype), (logits,), bw, "bce_with_logits")


# -- reductions and structure -------------------------------------------------

def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    y = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(y, (x,), bw, "sum")


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    s = tsum(x, axis, keepdims)
    return scale(s, s.size / x.size)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", x.shape, shape) from None
    return _result(y, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def swapaxes(x, a: int, b: int) -> Tensor:
    x = as_tensor(x)
    return _result(np.swapaxes(x.data, a, b), (x,), lambda g: (np.swapaxes(g, a, b),), "swapaxes")


def getitem(x, idx) -> Tensor:
    x = as_tensor(x)

    basic = all(isinstance(i, (int, slice, type(None), type(Ellipsis)))
                for i in (idx if isinstance(idx, tuple) else (idx,)))

    def bw(g):
        out = np.zeros_like(x.data)
        if basic:
            out[idx] = g
        else:
            np.add.at(out, idx, g)
        return (out,)

    return _result(x.data[idx], (x,), bw, "getitem")


def take_rows(table, ids) -> Tensor:
    """Embedding lookup: ``table[ids]`` with gradient scattered back."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.intp)

    def bw(g):
        out = np.zeros_like(table.data)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (out,)

    return _result(table.data[ids], (table,), bw, "take_rows")


def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        y = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeError("concat", ts[0].shape, ts[-1].shape) from None
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(y, ts, bw, "concat")


# -- finite-difference check -----------------------------------------------

def gradcheck(fn: Callable[[], Tensor], params: dict[str, Tensor], eps: float = 1e-6,
              max_entries: int | None = None, rng: np.random.Generator | None = None) -> dict[str, float]:
    """Compare analytic gradients of ``fn()`` against central differences.

    Returns, per parameter, max |analytic - numeric| / max(1, |numeric|).
    ``max_entries`` limits how many coordinates of each parameter are
    perturbed (chosen at random), which keeps large parameters tractable.
    """
    for p in params.values():
        p.grad = None
    loss = fn()
    if loss.requires_grad:
        backward(loss)
    report = {}
    rng = rng or np.random.default_rng(0)
    for name, p in params.items():
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, max_entries, replace=False)
        worst = 0.0
        with no_grad():
            for i in idx:
                orig = flat[i]
                flat[i] = orig + eps
                up = fn().item()
                flat[i] = orig - eps
                down = fn().item()
                flat[i] = orig
                numeric = (up - down) / (2 * eps)
                err = abs(analytic.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
                worst = max(worst, err)
        report[name] = worst
    return report
