import numpy as np
import pytest

from resolve_hd import tensor as T
from resolve_hd import vsa
from resolve_hd.baselines import AttentionalEncoder, TransformerClassifier, TransformerSeq2Seq
from resolve_hd.errors import ConfigError, SequenceLengthError
from resolve_hd.harness.gradcheck import check_model
from resolve_hd.hd_attention import relation_tensor_dense
from resolve_hd.resolve import ModelConfig, ResolveLayer, assemble, build_model


def layer(F=4, D=32, N_max=3, d_model=8, seed=0, **kw):
    return ResolveLayer(F, D, N_max, d_model, np.random.default_rng(seed), **kw)


def np_full_conv(x, w):
    return np.array([np.convolve(row, k) for row, k in zip(x, w)])


def test_single_object_reduces_to_binding(rng):
    lay = layer()
    x = rng.standard_normal((1, 4))
    _, parts = lay(x, return_parts=True)
    assert np.array_equal(parts["R_bar"].data, [[1.0]])
    assert np.allclose(parts["out_hd"].data, parts["h_s"].data * parts["h_o"].data, rtol=1e-14)


def test_zero_objects_give_zero_output():
    lay = layer(dropout=0.3)
    lay.train()
    out, parts = lay(np.zeros((2, 3, 4)), return_parts=True)
    assert not parts["h_eo"].data.any() and not parts["out_hd"].data.any() and not out.data.any()


def test_forward_matches_stepwise_numpy_oracle(rng):
    lay = layer(F=4, D=32, N_max=3)
    x = rng.standard_normal((3, 4))
    B = lay.encoder.basis.data
    h_o = np_full_conv(x, B)
    R = relation_tensor_dense(h_o)
    e = np.exp(R - R.max(-1, keepdims=True))
    R_bar = e / e.sum(-1, keepdims=True)
    h_eo = R_bar @ h_o
    h_s = np_full_conv(lay.symbols.data, B)
    expected = (h_s * h_eo) @ lay.W_down.data
    lay.eval()
    assert np.allclose(lay(x).data, expected, rtol=1e-12, atol=1e-12)


def test_sequence_too_long():
    with pytest.raises(SequenceLengthError):
        layer(N_max=2)(np.ones((3, 4)))


@pytest.mark.parametrize("D", [16, 64, 512])
def test_output_shape_independent_of_D(D, rng):
    assert layer(D=D, d_model=8)(rng.standard_normal((5, 3, 4))).shape == (5, 3, 8)


def test_w_down_init_scale():
    assert abs(layer(D=1024, d_model=64).W_down.data.std() - 1 / 32) < 1e-3


def test_unbinding_recovers_mixed_signal():
    rng = np.random.default_rng(0)
    lay = layer(F=32, D=1024, N_max=4, d_model=16)
    cos = []
    for _ in range(50):
        _, p = lay(rng.standard_normal((4, 32)), return_parts=True)
        h_eo, h_s = p["h_eo"].data, p["h_s"].data
        s = vsa.bipolarize(h_s)
        # diagnostic path: bind with the bipolarized symbols, unbind with the same signs
        recovered = vsa.bind(vsa.bind(s, h_eo), s)
        cos.append(vsa.bipolar_cosine(vsa.bipolarize(recovered), vsa.bipolarize(h_eo)))
        # the model's own real-valued binding unbinds with sign(h_s) as well
        cos.append(vsa.bipolar_cosine(vsa.bipolarize(p["out_hd"].data * s), vsa.bipolarize(h_eo)))
    assert np.min(cos) >= 0.9


def test_symbols_share_the_object_encoder(rng):
    lay = layer()
    _, p = lay(rng.standard_normal((2, 4)), return_parts=True)
    assert np.allclose(p["h_s"].data, lay.encoder(lay.symbols.data[:2]).data)


# -- assembly ---------------------------------------------------------------

def cfg(**kw):
    base = dict(F=4, D=32, N_max=3, d_model=8, n_heads=2, d_ff=8, n_dec_layers=1, head_hidden=(6,),
                n_outputs=2, tgt_vocab=3, dtype="float64")
    base.update(kw)
    return ModelConfig(**base)


def test_variant_a_parameter_census():
    names = {n for n, _ in assemble(cfg(variant="a")).named_parameters()}
    assert names == {"resolve.encoder.basis", "resolve.symbols", "resolve.W_down",
                     "head.layers.0.weight", "head.layers.0.bias",
                     "head.layers.1.weight", "head.layers.1.bias"}


def test_variant_b_has_attentional_front(rng):
    m = assemble(cfg(variant="b"))
    assert isinstance(m.front, AttentionalEncoder)
    assert m.resolve.encoder.config.F == 8
    assert m(rng.standard_normal((5, 3, 4))).shape == (5, 2)


def test_variant_c_decoder_reads_d_model_memory(rng):
    m = assemble(cfg(variant="c"))
    assert m.encoder.norm is not None
    memory, _ = m.encode(rng.standard_normal((5, 3, 4)))
    assert memory.shape == (5, 3, 8)
    tgt = np.zeros((5, 3), dtype=int)
    assert m(rng.standard_normal((5, 3, 4)), tgt).shape == (5, 3, 3)


def test_variant_d_skip_connection_matters(rng):
    m = assemble(cfg(variant="d"))
    m.eval()
    x = rng.standard_normal((4, 3, 4))
    tgt = rng.integers(0, 3, (4, 3))
    memory, _ = m.encode(x)
    assert memory.shape == (4, 6, 8)
    with_skip = m(x, tgt).data
    m.skip = False
    without = m(x, tgt).data
    assert np.abs(with_skip - without).max() > 1e-6


def test_generate_is_a_valid_token_sequence(rng):
    m = assemble(cfg(variant="c"))
    out = m.generate(rng.standard_normal((5, 3, 4)), 3)
    assert out.shape == (5, 3) and out.min() >= 0 and out.max() < 3


def test_build_model_dispatch():
    assert isinstance(build_model(cfg(model="transformer", variant="a")), TransformerClassifier)
    assert isinstance(build_model(cfg(model="transformer", variant="c")), TransformerSeq2Seq)
    with pytest.raises(ConfigError):
        assemble(cfg(model="transformer"))


@pytest.mark.parametrize("kw", [dict(variant="e"), dict(model="mlp"), dict(D=4), dict(dropout=1.0),
                                dict(d_model=9, n_heads=2), dict(temperature=0.0), dict(dtype="int8")])
def test_invalid_config(kw):
    with pytest.raises(ConfigError):
        build_model(cfg(**kw))


def test_config_dict_round_trip():
    c = cfg(variant="d", head_hidden=(5, 4))
    back = ModelConfig.from_dict(c.to_dict())
    assert back == c


def test_same_seed_same_weights():
    a, b = build_model(cfg(seed=3)), build_model(cfg(seed=3))
    for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
        assert na == nb and np.array_equal(pa.data, pb.data)


def test_gradcheck_variant_a_end_to_end():
    assert max(check_model("a", F=4, D=16, N=3).values()) < 1e-4


@pytest.mark.parametrize("variant", ["b", "c", "d"])
def test_gradcheck_other_variants(variant):
    assert max(check_model(variant, F=4, D=16, N=3, max_entries=15).values()) < 1e-4


def test_float32_training_path(rng):
    m = assemble(cfg(dtype="float32"))
    out = m(rng.standard_normal((2, 3, 4)).astype(np.float32))
    assert out.dtype == np.float32
    T.backward(T.tsum(out))
    assert all(p.grad.dtype == np.float32 for p in m.parameters())
