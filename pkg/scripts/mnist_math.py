"""MNIST-Math |3a - 2b|: RESOLVE variant (b) against the transformer baseline.

Needs the IDX files from ``scripts/fetch_mnist.py``.

    python scripts/mnist_math.py --out runs
"""
from _common import parser, run_all

if __name__ == "__main__":
    args = parser(__doc__).parse_args()
    run_all(["mnist_resolve_b.cfg", "mnist_transformer.cfg"], args, "accuracy", "mnist_math",
            "MNIST-Math |3a - 2b|")
