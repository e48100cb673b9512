"""Shared plumbing for the experiment scripts: load configs, run, plot, summarize."""
from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path

from resolve_hd.harness.config import RunConfig
from resolve_hd.harness.experiment import run_experiment
from resolve_hd.harness.plot import plot_learning_curves

ROOT = Path(__file__).resolve().parents[1]


def parser(description):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default="runs", help="parent directory for run directories")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override applied to every config in the experiment")
    p.add_argument("--tag", default="", help="suffix appended to each run_id")
    return p


def run_all(config_names, args, metric, plot_name, title):
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    metrics = []
    for name in config_names:
        cfg = RunConfig.load(ROOT / "configs" / name, [f"out_dir={args.out}", *args.set])
        if args.tag:
            cfg = cfg.replace(run_id=f"{cfg.run_id}_{args.tag}")
        for key in ("mnist_images", "mnist_labels"):
            path = getattr(cfg, key)
            if path and not Path(path).is_absolute():
                cfg = cfg.replace(**{key: str(ROOT / path)})
        run_dir = run_experiment(cfg)
        metrics.append(run_dir / "metrics.csv")
        for row in json.loads((run_dir / "summary.json").read_text())["summary"]:
            if row["metric"] == metric:
                print(f"{row['model']:<16} n={row['train_size']:<5} {metric} "
                      f"{row['mean']:.4f} +- {row['std']:.4f} ({row['n']} seeds)")
    out = Path(args.out) / f"{plot_name}{'_' + args.tag if args.tag else ''}.png"
    plot_learning_curves(metrics, out, metric=metric, title=title)
    print(f"plot: {out}")
