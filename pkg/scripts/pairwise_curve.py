"""Pairwise order relation: RESOLVE variant (a) learning curve over 10..210 samples.

    python scripts/pairwise_curve.py --out runs
"""
from _common import parser, run_all

if __name__ == "__main__":
    args = parser(__doc__).parse_args()
    run_all(["pairwise.cfg"], args, "accuracy", "pairwise_curve", "Pairwise order, variant (a)")
