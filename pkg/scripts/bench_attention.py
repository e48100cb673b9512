"""Attention-score benchmark over a grid of sequence lengths and dimensions.

    python scripts/bench_attention.py --N 16 64 128 --D 512 1024 2048 --json runs/bench.json
"""
import argparse
import json
from pathlib import Path

from resolve_hd.harness.bench import bench_attention

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--N", type=int, nargs="+", default=[16, 64, 128])
    p.add_argument("--D", type=int, nargs="+", default=[1024])
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--json", type=Path)
    args = p.parse_args()
    reports = []
    for D in args.D:
        for N in args.N:
            r = bench_attention(N=N, D=D, reps=args.reps)
            print(r.format(), end="\n\n")
            reports.append(r.to_dict())
    if args.json:
        args.json.parent.mkdir(parents=True, exist_ok=True)
        args.json.write_text(json.dumps(reports, indent=2))
