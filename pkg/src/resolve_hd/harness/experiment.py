"""Learning-curve sweeps over train sizes and seeds with CSV metrics."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .. import tasks
from ..checkpoint import save_checkpoint
from ..errors import RunExistsError, TrainingDivergedError
from ..resolve import build_model
from .config import RunConfig
from .train import evaluate, fit, task_kind

log = logging.getLogger(__name__)


@dataclass
class MetricsRecord:
    run_id: str
    seed: int
    task: str
    model: str
    train_size: int
    epoch: int
    split: str
    metric: str
    value: float


METRICS_HEADER = [f.name for f in fields(MetricsRecord)]
SUMMARY_HEADER = ["run_id", "task", "model", "train_size", "split", "metric", "n", "mean", "std"]


def model_label(cfg: RunConfig):
    return f"{cfg.model}-{cfg.variant}"


@lru_cache(maxsize=2)
def _mnist(images_path, labels_path):
    return tasks.load_mnist_idx(images_path, labels_path)


def load_task(cfg: RunConfig, seed):
    if cfg.task == "pairwise":
        return tasks.gen_pairwise_order(seed)
    if cfg.task == "sorting":
        return tasks.gen_sorting(seed, cfg.seq_len, cfg.n_sequences)
    images, labels = _mnist(cfg.mnist_images, cfg.mnist_labels)
    return tasks.gen_mnist_math(images, labels, seed, cfg.n_pairs)


def run_job(cfg: RunConfig, train_size, seed, ckpt_dir=None):
    """Train and test one (train_size, seed) cell.

    Returns ``(records, error_message)``; on divergence the records end with
    a ``diverged`` row and the message is set.
    """
    kind = task_kind(cfg.task)
    ds = load_task(cfg, seed)
    idx = ds.train_subset(train_size, seed)
    X, Y = ds.inputs[idx], ds.targets[idx]
    mcfg = cfg.model_config(seed)
    model = build_model(mcfg)
    label = model_label(cfg)
    rows = []

    def record(epoch, split, metric, value):
        rows.append(MetricsRecord(cfg.run_id, seed, cfg.task, label, train_size, epoch, split, metric,
                                  float(value)))

    def on_epoch(epoch, loss):
        record(epoch, "train", "loss", loss)
        if cfg.eval_every and epoch % cfg.eval_every == 0 and epoch != cfg.epochs:
            for k, v in evaluate(model, *ds.subset("val"), kind).items():
                record(epoch, "val", k, v)

    rng = np.random.default_rng([seed, train_size])
    try:
        fit(model, X, Y, kind, cfg.optimizer_config(), cfg.epochs, cfg.batch_size, rng, on_epoch)
    except TrainingDivergedError as exc:
        done = sum(1 for r in rows if r.split == "train" and r.metric == "loss")
        record(done + 1, "train", "diverged", float("nan"))
        return rows, str(exc)
    for split in ("val", "test"):
        for k, v in evaluate(model, *ds.subset(split), kind).items():
            record(cfg.epochs, split, k, v)
    if ckpt_dir is not None:
        save_checkpoint(Path(ckpt_dir) / f"ckpt_n{train_size}_s{seed}.npz", model, mcfg,
                        extra=dict(run_config=cfg.to_text(), seed=seed, train_size=train_size))
    return rows, None


def _job(args):
    return run_job(*args)


def final_rows(rows, cfg: RunConfig, split="test"):
    return [r for r in rows if r.split == split and r.epoch == cfg.epochs]


def summarize(rows, split="test"):
    """Mean and (population) std over seeds per (train_size, metric) for final rows."""
    groups = {}
    last_epoch = {}
    for r in rows:
        last_epoch[(r.train_size, r.seed)] = max(last_epoch.get((r.train_size, r.seed), 0), r.epoch)
    for r in rows:
        if r.split != split or r.epoch != last_epoch[(r.train_size, r.seed)]:
            continue
        groups.setdefault((r.run_id, r.task, r.model, r.train_size, r.metric), []).append(r.value)
    out = []
    for (run_id, task, model, size, metric), vals in sorted(groups.items()):
        v = np.asarray(vals)
        out.append(dict(run_id=run_id, task=task, model=model, train_size=size, split=split,
                        metric=metric, n=len(v), mean=float(v.mean()), std=float(v.std())))
    return out


def run_experiment(cfg: RunConfig):
    """Run every (train_size, seed) cell; returns the run directory.

    Writes ``config.txt`` (the validated config, verbatim), ``metrics.csv``
    (append-only, one row per epoch/split/metric), ``summary.csv`` and
    ``summary.json`` (mean/std over seeds), and checkpoints.
    """
    cfg.validate()
    run_dir = Path(cfg.out_dir) / cfg.run_id
    if run_dir.exists():
        raise RunExistsError(f"run {cfg.run_id!r} already exists at {run_dir}; runs are immutable")
    run_dir.mkdir(parents=True)
    (run_dir / "config.txt").write_text(cfg.to_text())
    ckpt_dir = None
    if cfg.save_checkpoints:
        ckpt_dir = run_dir / "checkpoints"
        ckpt_dir.mkdir()

    jobs = [(cfg, n, s, ckpt_dir) for n in cfg.train_sizes for s in cfg.seed_list]
    all_rows = []
    with open(run_dir / "metrics.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_HEADER)
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                results = pool.map(_job, jobs)
                error = _drain(results, writer, f, all_rows, cfg)
        else:
            error = _drain(map(_job, jobs), writer, f, all_rows, cfg)
    if error:
        raise TrainingDivergedError(error)

    summary = summarize(all_rows)
    with open(run_dir / "summary.csv", "w", newline="") as f:
        w = csv.DictWriter(f, SUMMARY_HEADER)
        w.writeheader()
        w.writerows(summary)
    (run_dir / "summary.json").write_text(json.dumps(
        dict(run_id=cfg.run_id, task=cfg.task, model=model_label(cfg), seeds=cfg.seed_list,
             train_sizes=cfg.train_sizes, summary=summary), indent=2))
    return run_dir


def _drain(results, writer, f, all_rows, cfg):
    for rows, error in results:
        for r in rows:
            writer.writerow(astuple(r))
        f.flush()
        all_rows.extend(rows)
        if rows:
            fin = {r.metric: r.value for r in final_rows(rows, cfg)}
            log.info("n=%s seed=%s test=%s", rows[0].train_size, rows[0].seed, fin)
        if error:
            return error
    return None


def read_metrics(path):
    with open(path, newline="") as f:
        rows = []
        for r in csv.DictReader(f):
            rows.append(MetricsRecord(r["run_id"], int(r["seed"]), r["task"], r["model"],
                                      int(r["train_size"]), int(r["epoch"]), r["split"],
                                      r["metric"], float(r["value"])))
    return rows
