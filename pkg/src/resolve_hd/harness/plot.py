"""Accuracy-vs-train-size curves from one or more ``metrics.csv`` files."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .experiment import read_metrics


def curve_points(rows, split="test", metric="accuracy"):
    """``{model: [(train_size, mean, std, n_seeds), ...]}`` from final-epoch rows.

    The final epoch is taken per (model, train_size, seed), so a seed that
    stopped early still contributes its last evaluation.
    """
    last = {}
    for r in rows:
        if r.split == split and r.metric == metric:
            key = (r.model, r.train_size, r.seed)
            if key not in last or r.epoch >= last[key].epoch:
                last[key] = r
    grouped = {}
    for (model, size, _), r in last.items():
        grouped.setdefault(model, {}).setdefault(size, []).append(r.value)
    return {model: [(size, float(np.mean(v)), float(np.std(v)), len(v))
                    for size, v in sorted(sizes.items())]
            for model, sizes in sorted(grouped.items())}


def plot_learning_curves(metrics_paths, out, split="test", metric="accuracy", title=None):
    """Write a plot (format from the suffix of ``out``); returns the curve points.

    Points averaged over fewer seeds than the best-covered point are
    annotated with their ``n``.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if isinstance(metrics_paths, (str, Path)):
        metrics_paths = [metrics_paths]
    rows = [r for p in metrics_paths for r in read_metrics(p)]
    curves = curve_points(rows, split, metric)
    if not curves:
        raise ValueError(f"no {split}/{metric} rows in {[str(p) for p in metrics_paths]}")
    full_n = max(n for pts in curves.values() for *_, n in pts)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for model, pts in curves.items():
        x, mean, std, n = (np.array(c) for c in zip(*pts))
        ax.errorbar(x, mean, yerr=std, marker="o", capsize=3, label=model)
        for xi, yi, ni in zip(x, mean, n):
            if ni < full_n:
                ax.annotate(f"n={ni}", (xi, yi), textcoords="offset points", xytext=(4, -10),
                            fontsize=7)
    ax.set_xlabel("training samples")
    ax.set_ylabel(f"{split} {metric}")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    plt.close(fig)
    return curves
