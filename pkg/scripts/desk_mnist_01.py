"""Desk-scale MNIST (0,1) run: FPQE against PCA on the same subset.

Trains the autoencoder, encodes both splits, trains the QNN and scores
accuracy plus reconstruction fidelity for each encoder, single-threaded.

Usage: python3 scripts/desk_mnist_01.py [--config configs/desk_mnist.cfg] [--out runs/desk01]
"""

import argparse
import time
from pathlib import Path

from threadpoolctl import threadpool_limits

from fpqe.bench import pipeline as pl
from fpqe.bench.config import ExperimentConfig


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=Path(__file__).resolve().parents[1] / "configs" / "desk_mnist.cfg")
    parser.add_argument("--out", default="runs/desk01")
    parser.add_argument("--encoders", default="fpqe,pca")
    args = parser.parse_args()
    base = ExperimentConfig.load(args.config).override(pair="0,1")
    out = Path(args.out)
    print(f"{'encoder':10s} {'accuracy':>8s} {'mse':>8s} {'psnr_db':>8s} {'ssim':>6s} {'seconds':>8s}")
    with threadpool_limits(limits=1):
        for kind in args.encoders.split(","):
            start = time.perf_counter()
            row = pl.run_cell(base.override(**{"encoder.kind": kind}), out)
            print(f"{kind:10s} {row.accuracy:8.3f} {row.mse:8.4f} {row.psnr_db:8.2f} {row.ssim:6.3f} "
                  f"{time.perf_counter() - start:8.0f}")
    print(f"rows appended to {out / 'results.csv'}")


if __name__ == "__main__":
    main()
