"""Finite-difference checks for every differentiable primitive and a tiny model."""
from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..resolve import ModelConfig, build_model


def _probe(out, rng):
    """Scalar loss ``sum(out * c)`` with a fixed random ``c`` so no gradient is trivial."""
    c = rng.standard_normal(out.shape)
    return T.tsum(T.mul(out, c))


def primitive_cases(seed=0):
    """``{name: (fn, params)}`` for :func:`resolve_hd.tensor.gradcheck`."""
    rng = np.random.default_rng(seed)

    def p(*shape, scale=1.0):
        return T.parameter(scale * rng.standard_normal(shape))

    cases = {}

    def case(name, params, build):
        probe_rng_seed = int(rng.integers(1 << 31))

        def fn():
            return _probe(build(*params), np.random.default_rng(probe_rng_seed))

        cases[name] = (fn, {f"{name}.{i}": q for i, q in enumerate(params)})

    case("add", [p(3, 4), p(4)], T.add)
    case("sub", [p(3, 4), p(3, 1)], T.sub)
    case("mul", [p(2, 3, 4), p(3, 4)], T.mul)
    case("scale", [p(3, 4)], lambda x: T.scale(x, -2.5))
    # keep inputs away from the kink at 0
    case("relu", [T.parameter(np.sign(rng.standard_normal((4, 5))) * rng.uniform(0.1, 2, (4, 5)))],
         T.relu)
    case("sigmoid", [p(4, 5, scale=3.0)], T.sigmoid)
    case("matmul", [p(2, 3, 4), p(4, 5)], T.matmul)
    case("matmul_batched", [p(2, 3, 4), p(2, 4, 2)], T.matmul)
    case("full_conv_shared", [p(2, 3, 4), p(5)], T.full_conv)
    case("full_conv_per_row", [p(2, 3, 4), p(3, 5)], T.full_conv)
    case("softmax", [p(3, 5, scale=2.0)], lambda x: T.softmax(x, axis=-1))
    mask = rng.random((3, 5)) > 0.3
    mask[:, 0] = True
    case("softmax_masked", [p(3, 5)], lambda x: T.softmax(x, axis=-1, mask=mask))
    case("layer_norm", [p(3, 6), p(6), p(6)], T.layer_norm)
    rm, rv = np.zeros(4), np.ones(4)
    case("batch_norm", [p(5, 2, 4), p(4), p(4)],
         lambda x, g, b: T.batch_norm(x, g, b, rm, rv, training=True))
    labels = rng.integers(0, 6, size=7)
    case("cross_entropy", [p(7, 6, scale=2.0)], lambda z: T.scale(T.cross_entropy(z, labels), 1.0))
    targets = rng.integers(0, 2, size=7).astype(float)
    case("bce_with_logits", [p(7, scale=2.0)], lambda z: T.bce_with_logits(z, targets))
    case("sum_axis", [p(3, 4, 5)], lambda x: T.tsum(x, axis=1))
    case("mean", [p(3, 4)], lambda x: T.mean(x, axis=0, keepdims=True))
    case("reshape", [p(3, 4)], lambda x: T.reshape(x, (2, 6)))
    case("swapaxes", [p(2, 3, 4)], lambda x: T.swapaxes(x, 0, 2))
    case("getitem_basic", [p(4, 5)], lambda x: T.getitem(x, (slice(1, 3), 2)))
    case("getitem_fancy", [p(4, 5)], lambda x: T.getitem(x, np.array([0, 2, 2, 3])))
    ids = rng.integers(0, 5, size=(2, 3))
    case("take_rows", [p(5, 4)], lambda t: T.take_rows(t, ids))
    case("concat", [p(2, 3), p(2, 4)], lambda a, b: T.concat([a, b], axis=1))
    # away from the STE window edges at |x| = 1
    ste_in = rng.uniform(-0.9, 0.9, (3, 4))
    ste_in[0, :2] = [1.5, -2.0]
    case("sign_ste", [T.parameter(ste_in)], T.sign_ste)

    def dropped(x):
        return T.dropout(x, 0.3, np.random.default_rng(7), training=True)

    case("dropout", [p(4, 5)], dropped)
    return cases


def check_primitives(seed=0, eps=1e-6):
    """Worst relative error per primitive (hard sign replaced by its surrogate)."""
    out = {}
    with T.ste_surrogate():
        for name, (fn, params) in primitive_cases(seed).items():
            out[name] = max(T.gradcheck(fn, params, eps=eps).values())
    return out


def check_model(variant="a", F=4, D=16, N=3, seed=0, eps=1e-6, max_entries=None):
    """Worst relative error per parameter of a tiny float64 model, end to end.

    Dropout is disabled so repeated forward passes are deterministic; the
    sign nonlinearities run as hard-tanh so finite differences see the
    straight-through derivative.
    """
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(variant=variant, F=F, D=D, N_max=N, d_model=8, n_heads=2, d_ff=8,
                      n_dec_layers=1, dropout=0.0, head_hidden=(6,), n_outputs=3, tgt_vocab=N,
                      dtype="float64", seed=seed)
    model = build_model(cfg)
    model.train()
    x = rng.standard_normal((5, N, F))
    if cfg.sequence_output:
        from ..baselines import shift_right
        y = np.stack([rng.permutation(N) for _ in range(5)])
        y_in = shift_right(y, model.decoder.start_token)

        def fn():
            return T.cross_entropy(model(x, y_in), y)
    else:
        y = rng.integers(0, 3, size=5)

        def fn():
            return T.cross_entropy(model(x), y)

    with T.ste_surrogate():
        return T.gradcheck(fn, dict(model.named_parameters()), eps=eps, max_entries=max_entries,
                           rng=rng)
