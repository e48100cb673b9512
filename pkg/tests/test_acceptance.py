"""Acceptance criteria, each reported as one PASS/FAIL line.

The training criteria run the configs in ``configs/`` unchanged apart from
the output directory (and absolute MNIST paths), so the numbers here are the
ones ``resolve-hd train --config ...`` produces. They take about an hour and
a half in total on one CPU core; deselect them with ``-m "not slow"``.
"""
import json
import time

import numpy as np
import pytest

from conftest import CONFIG_DIR, MNIST_DIR
from resolve_hd import hd_attention as hda
from resolve_hd import tensor as T
from resolve_hd import vsa
from resolve_hd.harness.bench import bench_attention
from resolve_hd.harness.config import RunConfig
from resolve_hd.harness.experiment import run_experiment
from resolve_hd.harness.gradcheck import check_model, check_primitives
from resolve_hd.hd_encoder import EncoderConfig, HDEncoder


def run_config(tmp_path_factory, name, **overrides):
    cfg = RunConfig.load(CONFIG_DIR / name).replace(out_dir=str(tmp_path_factory.mktemp("runs")),
                                                   **overrides)
    t0 = time.perf_counter()
    run_dir = run_experiment(cfg)
    summary = json.loads((run_dir / "summary.json").read_text())["summary"]
    return summary, time.perf_counter() - t0


def mean_of(summary, train_size, metric):
    (row,) = [s for s in summary if s["train_size"] == train_size and s["metric"] == metric]
    return row["mean"], row["std"], row["n"]


@pytest.fixture(scope="module")
def pairwise_curve(tmp_path_factory):
    return run_config(tmp_path_factory, "pairwise.cfg")


@pytest.mark.slow
def test_criterion_1_pairwise_accuracy_at_210(pairwise_curve, report):
    summary, seconds = pairwise_curve
    mean, std, n = mean_of(summary, 210, "accuracy")
    ok = report(1, mean >= 0.75 and n == 5,
                f"pairwise variant a, n=210, {n} seeds: mean test accuracy {mean:.4f} "
                f"(std {std:.4f}), need >= 0.75 [curve run {seconds / 60:.1f} min]")
    assert ok


@pytest.mark.slow
def test_criterion_2_learning_curve_rises(pairwise_curve, report):
    summary, _ = pairwise_curve
    hi, _, n_hi = mean_of(summary, 210, "accuracy")
    lo, _, n_lo = mean_of(summary, 10, "accuracy")
    ok = report(2, hi - lo >= 0.15 and n_hi == n_lo == 5,
                f"pairwise mean accuracy n=210 {hi:.4f} minus n=10 {lo:.4f} = {hi - lo:+.4f}, need >= 0.15")
    assert ok


@pytest.mark.slow
def test_criterion_3_sorting_resolve_beats_transformer(tmp_path_factory, report):
    res, t_res = run_config(tmp_path_factory, "sorting_resolve.cfg")
    tra, t_tra = run_config(tmp_path_factory, "sorting_transformer.cfg")
    r, r_std, r_n = mean_of(res, 460, "element_accuracy")
    t, t_std, t_n = mean_of(tra, 460, "element_accuracy")
    ok = report(3, r >= t and min(r_n, t_n) >= 5,
                f"sorting n=460, {r_n} seeds: element accuracy RESOLVE-c {r:.4f} (std {r_std:.4f}) "
                f"vs transformer {t:.4f} (std {t_std:.4f}) [{(t_res + t_tra) / 60:.1f} min]")
    assert ok


@pytest.mark.slow
def test_criterion_4_mnist_math_resolve_beats_transformer(tmp_path_factory, report):
    images, labels = MNIST_DIR / "images-idx3-ubyte", MNIST_DIR / "labels-idx1-ubyte"
    if not (images.exists() and labels.exists()):
        pytest.fail("MNIST IDX files missing; run `python scripts/fetch_mnist.py` first")
    paths = dict(mnist_images=str(images), mnist_labels=str(labels))
    res, t_res = run_config(tmp_path_factory, "mnist_resolve_b.cfg", **paths)
    tra, t_tra = run_config(tmp_path_factory, "mnist_transformer.cfg", **paths)
    size = RunConfig.load(CONFIG_DIR / "mnist_resolve_b.cfg").train_sizes[0]
    r, r_std, r_n = mean_of(res, size, "accuracy")
    t, t_std, t_n = mean_of(tra, size, "accuracy")
    ok = report(4, r >= t,
                f"MNIST-Math 10000 pairs ({size} train), {r_n} seeds: accuracy RESOLVE-b {r:.4f} "
                f"(std {r_std:.4f}) vs transformer {t:.4f} (std {t_std:.4f}) "
                f"[{(t_res + t_tra) / 60:.1f} min]")
    assert ok


def random_ternary(rng, n, dim):
    return rng.choice(np.array([-1, 0, 1], dtype=np.int8), size=(n, dim), p=[0.45, 0.1, 0.45])


def test_criterion_5_oracle_suite(report):
    t0 = time.perf_counter()
    checks = {}
    rng = np.random.default_rng(5)

    prim = check_primitives(seed=0)
    model_a = check_model("a")
    worst = max(max(prim.values()), max(model_a.values()))
    checks["gradcheck"] = (worst < 1e-4, f"max rel err {worst:.1e} over {len(prim)} primitives + variant a")

    exact = True
    for dim in (64, 1024):
        a, b = random_ternary(rng, 10_000, dim), random_ternary(rng, 10_000, dim)
        dense = (a.astype(np.int64) * b).sum(-1)
        pa, pb = vsa.pack(a), vsa.pack(b)
        exact &= np.array_equal(vsa.packed_dot(pa, pb), dense)
        own = vsa.PackedBipolar(dim, pa.words[:, None], pa.zero_mask[:, None])
        pair = vsa.PackedBipolar(dim, pb.words[:, None, None], pb.zero_mask[:, None, None])
        exact &= np.array_equal(hda.packed_dots(own, pair)[:, 0, 0], dense)
    checks["packed_dot"] = (exact, "10^4 ternary pairs at D=64,1024")

    x, y, z = (rng.integers(-3, 4, (1000, 1024)) for _ in range(3))
    bp = vsa.random_bipolar(rng, 1000, 1024)
    algebra = (np.array_equal(vsa.bind(x, y), vsa.bind(y, x))
               and np.array_equal(vsa.bundle(x, y), vsa.bundle(y, x))
               and np.array_equal(vsa.bind(x, vsa.bundle(y, z)), vsa.bundle(vsa.bind(x, y), vsa.bind(x, z)))
               and np.array_equal(vsa.bind(bp, bp), np.ones_like(bp)))
    checks["algebra"] = (algebra, "commutativity, distributivity, self-binding")

    h = rng.standard_normal((50, 8, 1024))
    diag = all(np.array_equal(np.diagonal(R, axis1=-2, axis2=-1), np.ones((50, 8)))
               for R in (hda.relation_tensor_dense(h), hda.relation_tensor_packed(h),
                         hda.relation_tensor(h).data))
    checks["diagonal"] = (diag, "R_ii = 1 on dense, packed and trainable paths")

    logits = rng.standard_normal((200, 17)) * 30
    mask = rng.random((200, 17)) < 0.7
    mask[:, 0] = True
    rows = [T.softmax(logits).data.sum(-1), T.softmax(logits, mask=mask).data.sum(-1)]
    dev = max(np.abs(r - 1).max() for r in rows)
    checks["softmax"] = (dev <= 1e-12, f"max |row sum - 1| {dev:.1e}")

    a, b = vsa.random_bipolar(rng, 1000, 1024), vsa.random_bipolar(rng, 1000, 1024)
    cos_rand = np.abs(vsa.bipolar_cosine(a.astype(np.int64), b)).mean()
    enc = HDEncoder(EncoderConfig(32, 1024, 2), rng)
    codes = vsa.bipolarize(enc(rng.standard_normal((1000, 2, 32))).data)
    cos_enc = np.abs(vsa.bipolar_cosine(codes[:, 0], codes[:, 1])).mean()
    checks["quasi_orthogonality"] = (max(cos_rand, cos_enc) < 0.05,
                                     f"mean |cos| random {cos_rand:.4f}, encoder across positions {cos_enc:.4f}")

    seconds = time.perf_counter() - t0
    failed = [k for k, (ok, _) in checks.items() if not ok]
    detail = "; ".join(f"{k} {'ok' if ok else 'FAILED'} ({msg})" for k, (ok, msg) in checks.items())
    ok = report(5, not failed and seconds < 300, f"{detail} [{seconds:.0f} s]")
    assert ok, failed


def test_criterion_6_packed_attention_benchmark(report):
    r = bench_attention(N=64, D=1024, reps=50)
    ok = report(6, r.packed_over_float_bytes <= 1 / 8 and r.dense_equals_packed
                and r.packed_speedup_over_dense > 1 and r.packed_speedup_over_float > 1,
                f"N=64 D=1024: packed/float bytes per score {r.packed_over_float_bytes:.4f} (need <= 0.125), "
                f"R identical {r.dense_equals_packed}, packed {r.path('packed_hd').seconds * 1e3:.4f} ms vs "
                f"dense HD {r.path('dense_hd').seconds * 1e3:.4f} ms, float QK^T "
                f"{r.path('float_qk').seconds * 1e3:.4f} ms")
    assert ok
