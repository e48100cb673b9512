import json

import numpy as np
import pytest

from resolve_hd.checkpoint import FORMAT, load_checkpoint, read_header, save_checkpoint
from resolve_hd.errors import ConfigError
from resolve_hd.resolve import ModelConfig, build_model


@pytest.mark.parametrize("model, variant", [("resolve", "a"), ("resolve", "b"), ("resolve", "c"),
                                            ("resolve", "d"), ("transformer", "b"),
                                            ("transformer", "c")])
def test_round_trip_reproduces_outputs(model, variant, tmp_path, rng):
    cfg = ModelConfig(model=model, variant=variant, F=4, D=32, N_max=3, d_model=8, d_ff=8,
                      n_dec_layers=1, head_hidden=(5,), n_outputs=2, tgt_vocab=3, seed=4)
    m = build_model(cfg)
    x = rng.standard_normal((6, 3, 4)).astype(np.float32)
    if cfg.sequence_output:
        m.train()
        m.encode(x)  # moves batch-norm running statistics away from their init
        m.eval()
        before = m.generate(x, 3)
    else:
        m.eval()
        before = m(x).data
    path = save_checkpoint(tmp_path / "m.npz", m, cfg, extra={"note": "x"})
    m2, cfg2, header = load_checkpoint(path)
    assert cfg2 == cfg and header["extra"] == {"note": "x"}
    for (n1, p1), (n2, p2) in zip(m.named_parameters(), m2.named_parameters()):
        assert n1 == n2 and np.array_equal(p1.data, p2.data) and p1.dtype == p2.dtype
    for (n1, b1), (_, b2) in zip(m.buffers(), m2.buffers()):
        assert np.array_equal(b1, b2), n1
    m2.eval()
    after = m2.generate(x, 3) if cfg.sequence_output else m2(x).data
    assert np.array_equal(before, after)


def test_header_contents(tmp_path):
    cfg = ModelConfig(F=4, D=32, N_max=2, d_model=8)
    path = save_checkpoint(tmp_path / "m.npz", build_model(cfg), cfg)
    h = read_header(path)
    assert h["format"] == FORMAT and h["version"] == 1
    assert h["arrays"]["resolve.encoder.basis"] == {"shape": [2, 29], "dtype": "float32", "kind": "param"}
    assert h["model_config"]["optimizer"]["kind"] == "adamw"


def test_rejects_foreign_and_future_files(tmp_path):
    np.savez(tmp_path / "a.npz", __header__=np.frombuffer(json.dumps({"format": "x"}).encode(), np.uint8))
    with pytest.raises(ConfigError):
        read_header(tmp_path / "a.npz")
    blob = json.dumps({"format": FORMAT, "version": 99}).encode()
    np.savez(tmp_path / "b.npz", __header__=np.frombuffer(blob, np.uint8))
    with pytest.raises(ConfigError):
        read_header(tmp_path / "b.npz")
