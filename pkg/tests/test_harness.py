import csv
import json

import numpy as np
import pytest

from resolve_hd import tensor as T
from resolve_hd.errors import ConfigError, RunExistsError, TrainingDivergedError
from resolve_hd.harness import cli
from resolve_hd.harness import train as train_mod
from resolve_hd.harness.bench import bench_attention
from resolve_hd.harness.config import RunConfig
from resolve_hd.harness.experiment import (METRICS_HEADER, MetricsRecord, read_metrics, run_experiment,
                                           summarize)
from resolve_hd.harness.plot import curve_points, plot_learning_curves


def tiny(tmp_path, **kw):
    base = dict(run_id="r", out_dir=str(tmp_path), epochs=2, D=64, d_model=8, d_ff=8, n_dec_layers=1,
                head_hidden=[4], train_sizes=[20], n_seeds=2)
    base.update(kw)
    return RunConfig(**base)


# -- config ------------------------------------------------------------------

def test_config_text_round_trip():
    cfg = RunConfig(run_id="x", train_sizes=[10, 60], seeds=[3, 4], lr=5e-4, batchnorm=False)
    assert RunConfig.from_text(cfg.to_text()) == cfg


def test_config_parsing_types_comments_and_overrides():
    text = "# pairwise\ntask = sorting  # inline\nvariant = c\ntrain_sizes = 260, 310\nlr=0.0005\nshared_basis = yes\n"
    cfg = RunConfig.from_text(text, ["epochs=7", "lr = 1e-3"])
    assert cfg.task == "sorting" and cfg.train_sizes == [260, 310]
    assert cfg.lr == 1e-3 and cfg.epochs == 7 and cfg.shared_basis is True


@pytest.mark.parametrize("text", ["bogus = 1", "epochs = ten", "batchnorm = maybe", "no equals sign"])
def test_config_parse_errors(text):
    with pytest.raises(ConfigError):
        RunConfig.from_text(text)


@pytest.mark.parametrize("kw", [dict(task="cifar"), dict(variant="c"), dict(epochs=0), dict(lr=-1.0),
                                dict(train_sizes=[]), dict(task="mnist_math", variant="b"),
                                dict(run_id="a/b"), dict(D=16), dict(optimizer="sgd")])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw).validate()


def test_seeds_default_to_range():
    assert RunConfig(n_seeds=3).seed_list == [0, 1, 2]
    assert RunConfig(seeds=[7, 9]).seed_list == [7, 9]


def test_model_config_per_task():
    mc = RunConfig(task="sorting", variant="c", seq_len=5).model_config(seed=2)
    assert (mc.F, mc.N_max, mc.tgt_vocab, mc.seed) == (12, 5, 5, 2)
    mc = RunConfig(task="mnist_math", variant="b", mnist_images="i", mnist_labels="l").model_config()
    assert (mc.F, mc.n_outputs) == (784, 28)


# -- run_experiment ------------------------------------------------------------

def final_test(rows, metric="accuracy"):
    last = max(r.epoch for r in rows)
    return [r for r in rows if r.split == "test" and r.metric == metric and r.epoch == last]


def test_pairwise_run_structure(tmp_path):
    cfg = tiny(tmp_path, train_sizes=[210], n_seeds=5, epochs=1)
    run_dir = run_experiment(cfg)
    assert (run_dir / "config.txt").read_text() == cfg.to_text()
    rows = read_metrics(run_dir / "metrics.csv")
    assert len(final_test(rows)) == 5
    with open(run_dir / "metrics.csv") as f:
        assert next(csv.reader(f)) == METRICS_HEADER
    summary = json.loads((run_dir / "summary.json").read_text())["summary"]
    acc = [s for s in summary if s["metric"] == "accuracy"]
    assert len(acc) == 1 and acc[0]["n"] == 5
    vals = np.array([r.value for r in final_test(rows)])
    assert acc[0]["mean"] == pytest.approx(vals.mean(), abs=1e-15)
    assert acc[0]["std"] == pytest.approx(vals.std(), abs=1e-15)
    assert len(list((run_dir / "checkpoints").glob("*.npz"))) == 5
    # one row per (epoch, split, metric) within each job
    keys = [(r.seed, r.train_size, r.epoch, r.split, r.metric) for r in rows]
    assert len(keys) == len(set(keys))


def test_existing_run_is_refused(tmp_path):
    cfg = tiny(tmp_path, n_seeds=1, epochs=1)
    run_experiment(cfg)
    with pytest.raises(RunExistsError):
        run_experiment(cfg)


def test_invalid_config_aborts_before_any_output(tmp_path):
    with pytest.raises(ConfigError):
        run_experiment(tiny(tmp_path, task="sorting", variant="a"))
    assert not (tmp_path / "r").exists()


def test_sorting_sweep_rows(tmp_path):
    sizes = list(range(260, 461, 50))
    cfg = tiny(tmp_path, task="sorting", variant="c", train_sizes=sizes, n_seeds=2, epochs=1,
               n_sequences=700, save_checkpoints=False)
    rows = read_metrics(run_experiment(cfg) / "metrics.csv")
    fin = final_test(rows, "element_accuracy")
    assert sorted((r.train_size, r.seed) for r in fin) == [(n, s) for n in sizes for s in (0, 1)]
    assert len(final_test(rows, "sequence_accuracy")) == 10


def test_reproducible_at_64_bit(tmp_path):
    def run(name):
        cfg = tiny(tmp_path, run_id=name, dtype="float64", epochs=2, eval_every=1)
        return [(r.seed, r.epoch, r.split, r.metric, r.value) for r in
                read_metrics(run_experiment(cfg) / "metrics.csv")]

    assert run("one") == run("two")


def test_parallel_workers_match_serial(tmp_path):
    def rows(name, workers):
        cfg = tiny(tmp_path, run_id=name, workers=workers, n_seeds=2, train_sizes=[20, 30],
                   save_checkpoints=False)
        return sorted((r.seed, r.train_size, r.epoch, r.split, r.metric, r.value) for r in
                      read_metrics(run_experiment(cfg) / "metrics.csv"))

    assert rows("serial", 1) == rows("parallel", 2)


def test_nan_loss_aborts_with_diagnostic_row(tmp_path, monkeypatch):
    real = train_mod.loss_fn
    calls = {"n": 0}

    def poisoned(*args):
        calls["n"] += 1
        loss = real(*args)
        return T.scale(loss, float("nan")) if calls["n"] > 1 else loss

    monkeypatch.setattr(train_mod, "loss_fn", poisoned)
    cfg = tiny(tmp_path, n_seeds=1, epochs=3, train_sizes=[10])
    with pytest.raises(TrainingDivergedError):
        run_experiment(cfg)
    rows = read_metrics(tmp_path / "r" / "metrics.csv")
    assert rows[-1].metric == "diverged" and rows[-1].epoch == 2
    assert not (tmp_path / "r" / "summary.csv").exists()


def test_summary_recomputable_from_metrics(tmp_path):
    run_dir = run_experiment(tiny(tmp_path, train_sizes=[10, 30], n_seeds=3, epochs=1))
    rows = read_metrics(run_dir / "metrics.csv")
    with open(run_dir / "summary.csv") as f:
        written = list(csv.DictReader(f))
    recomputed = summarize(rows)
    assert len(written) == len(recomputed)
    for w, r in zip(written, recomputed):
        assert float(w["mean"]) == r["mean"] and float(w["std"]) == r["std"] and int(w["n"]) == r["n"]


# -- plots ---------------------------------------------------------------------

def write_metrics(path, model, sizes, seeds, drop=()):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRICS_HEADER)
        for n in sizes:
            for s in seeds:
                if (n, s) in drop:
                    continue
                w.writerow(["r", s, "pairwise", model, n, 100, "test", "accuracy", 0.5 + n / 1000 + s / 100])
    return path


def test_one_model_one_curve(tmp_path):
    p = write_metrics(tmp_path / "m.csv", "resolve-a", [10, 60, 110, 160, 210], range(5))
    curves = plot_learning_curves(p, tmp_path / "c.png")
    assert list(curves) == ["resolve-a"] and len(curves["resolve-a"]) == 5
    assert (tmp_path / "c.png").stat().st_size > 0


def test_two_models_two_curves(tmp_path):
    a = write_metrics(tmp_path / "a.csv", "resolve-a", [10, 60], range(3))
    b = write_metrics(tmp_path / "b.csv", "transformer-a", [10, 60], range(3))
    assert set(plot_learning_curves([a, b], tmp_path / "c.svg")) == {"resolve-a", "transformer-a"}


def test_missing_seed_reduces_n(tmp_path):
    p = write_metrics(tmp_path / "m.csv", "resolve-a", [10, 60], range(5), drop={(60, 4)})
    pts = curve_points(read_metrics(p))["resolve-a"]
    assert [n for *_, n in pts] == [5, 4]
    assert pts[1][1] == pytest.approx(np.mean([0.56 + s / 100 for s in range(4)]))
    plot_learning_curves(p, tmp_path / "c.png")


def test_empty_metrics_is_an_error(tmp_path):
    p = write_metrics(tmp_path / "m.csv", "resolve-a", [], [])
    with pytest.raises(ValueError):
        plot_learning_curves(p, tmp_path / "c.png")


# -- bench ---------------------------------------------------------------------

def test_bench_report_small():
    r = bench_attention(N=8, D=256, reps=2)
    assert [p.name for p in r.paths] == ["float_qk", "dense_hd", "packed_hd"]
    assert r.dense_equals_packed
    assert r.path("float_qk").bytes_per_score == 2 * 256 * 4
    assert r.path("packed_hd").bytes_per_score == 5 * 4 * 8
    assert set(bench_attention(N=4, D=64, reps=1).to_dict()) == set(r.to_dict())


# -- CLI -----------------------------------------------------------------------

@pytest.mark.parametrize("cmd", ["gen-data", "train", "eval", "bench", "gradcheck", "plot"])
def test_every_subcommand_has_help(cmd, capsys):
    with pytest.raises(SystemExit) as e:
        cli.main([cmd, "--help"])
    assert e.value.code == 0 and "usage" in capsys.readouterr().out


def test_cli_train_eval_plot(tmp_path, capsys):
    cfg = tmp_path / "p.cfg"
    cfg.write_text(tiny(tmp_path, run_id="c", n_seeds=1).to_text())
    assert cli.main(["train", "--config", str(cfg), "--set", "epochs=1"]) == 0
    ckpt = tmp_path / "c" / "checkpoints" / "ckpt_n20_s0.npz"
    capsys.readouterr()
    assert cli.main(["eval", "--checkpoint", str(ckpt)]) == 0
    evaluated = json.loads(capsys.readouterr().out)
    recorded = final_test(read_metrics(tmp_path / "c" / "metrics.csv"))[0].value
    assert evaluated["accuracy"] == recorded
    assert cli.main(["plot", str(tmp_path / "c" / "metrics.csv"), "--out", str(tmp_path / "c.png")]) == 0
    assert cli.main(["train", "--config", str(cfg)]) == 2  # immutable run


def test_cli_gen_data_and_errors(tmp_path):
    assert cli.main(["gen-data", "--task", "pairwise", "--out", str(tmp_path / "p.tsv")]) == 0
    assert sum(1 for _ in open(tmp_path / "p.tsv")) == 4097
    assert cli.main(["gen-data", "--task", "mnist_math", "--out", str(tmp_path / "m.tsv")]) == 2
    assert cli.main(["train", "--set", "task=nope"]) == 2


def test_cli_gradcheck_and_bench(capsys):
    assert cli.main(["gradcheck", "--variants", "a"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert cli.main(["bench", "--N", "8", "--D", "128", "--reps", "2", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["dense_equals_packed"] is True
