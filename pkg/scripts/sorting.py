"""Object sorting: RESOLVE variant (c) against the transformer baseline.

By default both models train on 460 sequences. ``--sweep`` runs the full
learning curve over 260..460 training sequences in steps of 50.

    python scripts/sorting.py --out runs
    python scripts/sorting.py --out runs --sweep
"""
from _common import parser, run_all

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--sweep", action="store_true")
    args = p.parse_args()
    if args.sweep:
        args.set = ["train_sizes=260,310,360,410,460", *args.set]
    run_all(["sorting_resolve.cfg", "sorting_transformer.cfg"], args, "element_accuracy",
            "sorting", "Object sorting, element-wise accuracy")
