"""Write the 5000-image MNIST sample bundled with mlxtend as IDX train files.

Usage: python3 scripts/make_mnist_subset.py --out data/mnist
Then point a config at it with ``data.mnist=data/mnist``.
"""

import argparse

from fpqe.data import export_mlxtend_mnist, load_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data/mnist", help="output directory")
    args = parser.parse_args()
    out = export_mlxtend_mnist(args.out)
    ds = load_dataset("mnist", out)
    print(f"wrote {len(ds)} images to {out}")


if __name__ == "__main__":
    main()
