"""``resolve-hd`` command line: gen-data, train, eval, bench, gradcheck, plot."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, IDXError, RunExistsError, TrainingDivergedError
from .config import TASKS, RunConfig


def cmd_gen_data(args):
    from ..tasks import save_dataset_text
    from .experiment import load_task

    cfg = RunConfig(task=args.task, seq_len=args.seq_len, n_sequences=args.n_sequences,
                    n_pairs=args.n_pairs, mnist_images=args.mnist_images or "",
                    mnist_labels=args.mnist_labels or "")
    if cfg.task == "mnist_math" and not (cfg.mnist_images and cfg.mnist_labels):
        raise ConfigError("mnist_math needs --mnist-images and --mnist-labels")
    ds = load_task(cfg, args.seed)
    save_dataset_text(ds, args.out)
    sizes = {k: len(v) for k, v in ds.splits.items()}
    print(f"wrote {len(ds.targets)} examples to {args.out} {sizes}")


def cmd_train(args):
    from .experiment import run_experiment

    cfg = RunConfig.load(args.config, args.set) if args.config else RunConfig.from_text("", args.set)
    run_dir = run_experiment(cfg)
    summary = json.loads((run_dir / "summary.json").read_text())
    for row in summary["summary"]:
        if row["metric"] in ("accuracy", "sequence_accuracy"):
            print(f"{row['model']} n={row['train_size']} {row['metric']}: "
                  f"{row['mean']:.4f} +- {row['std']:.4f} ({row['n']} seeds)")
    print(f"run directory: {run_dir}")


def cmd_eval(args):
    from ..checkpoint import load_checkpoint
    from .experiment import load_task
    from .train import evaluate, task_kind

    model, _, header = load_checkpoint(args.checkpoint)
    extra = header["extra"]
    cfg = RunConfig.from_text(extra["run_config"], args.set)
    ds = load_task(cfg, extra["seed"])
    metrics = evaluate(model, *ds.subset(args.split), task_kind(cfg.task))
    print(json.dumps(dict(checkpoint=str(args.checkpoint), split=args.split, **metrics), indent=2))


def cmd_bench(args):
    from .bench import bench_attention

    report = bench_attention(args.N, args.D, args.emb, args.reps, args.seed)
    print(json.dumps(report.to_dict(), indent=2) if args.json else report.format())
    return 0 if report.dense_equals_packed else 1


def cmd_gradcheck(args):
    from .gradcheck import check_model, check_primitives

    worst = 0.0
    for name, err in check_primitives(args.seed).items():
        print(f"{name:<20} {err:.3e}")
        worst = max(worst, err)
    for variant in args.variants:
        err = max(check_model(variant, args.F, args.D, args.N, args.seed).values())
        print(f"{'variant ' + variant:<20} {err:.3e}")
        worst = max(worst, err)
    ok = worst < args.tol
    print(f"max relative error {worst:.3e} ({'PASS' if ok else 'FAIL'} at tol {args.tol:g})")
    return 0 if ok else 1


def cmd_plot(args):
    from .plot import plot_learning_curves

    curves = plot_learning_curves(args.metrics, args.out, args.split, args.metric, args.title)
    for model, pts in curves.items():
        print(model, " ".join(f"{n}:{m:.3f}+-{s:.3f}" for n, m, s, _ in pts))
    print(f"wrote {args.out}")


def build_parser():
    ap = argparse.ArgumentParser(prog="resolve-hd", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log per-job progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a task dataset and write it as TSV")
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output .tsv path")
    p.add_argument("--seq-len", type=int, default=6, help="sorting: sequence length")
    p.add_argument("--n-sequences", type=int, default=1500, help="sorting: dataset size")
    p.add_argument("--n-pairs", type=int, default=10000, help="mnist_math: number of pairs")
    p.add_argument("--mnist-images", help="mnist_math: IDX image file")
    p.add_argument("--mnist-labels", help="mnist_math: IDX label file")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="run a learning-curve sweep (train sizes x seeds)")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on its task split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a stored run-config key, e.g. mnist_images=...")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench", help="attention-score microbenchmark")
    p.add_argument("--N", type=int, default=64, help="sequence length")
    p.add_argument("--D", type=int, default=1024, help="hypervector dimension")
    p.add_argument("--emb", type=int, default=None, help="float QK^T width (default D)")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--F", type=int, default=4)
    p.add_argument("--D", type=int, default=16)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variants", default="a", help="model variants to check, e.g. abcd")
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("plot", help="accuracy vs train size from metrics.csv files")
    p.add_argument("metrics", nargs="+", help="metrics.csv paths")
    p.add_argument("--out", required=True, help="image path (.png, .pdf, .svg)")
    p.add_argument("--split", default="test")
    p.add_argument("--metric", default="accuracy")
    p.add_argument("--title")
    p.set_defaults(fn=cmd_plot)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    try:
        return args.fn(args) or 0
    except (ConfigError, IDXError, RunExistsError, TrainingDivergedError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
