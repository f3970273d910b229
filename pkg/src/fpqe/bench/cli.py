"""``fpqe`` command line: one verb per pipeline stage plus the table sweeps.

Every verb accepts the shared flags ``--config --seed --out --force
--threads`` and ``--set key=value`` overrides on top of the config file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from contextlib import nullcontext
from pathlib import Path

from .. import __version__
from ..data import MissingDataError, ParseError
from . import pipeline as pl
from .config import ExperimentConfig


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("shared options")
    g.add_argument("--config", type=Path, help="key=value config file")
    g.add_argument("--seed", type=int, help="override the config seed")
    g.add_argument("--out", type=Path, help="output directory (default: config output_dir)")
    g.add_argument("--force", action="store_true", help="overwrite existing outputs")
    g.add_argument("--threads", type=int, help="cap BLAS/OpenMP threads; 1 gives bitwise-repeatable runs")
    g.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key, e.g. --set qnn.layers=1 (repeatable)")
    g.add_argument("--dataset", help="shorthand for --set dataset=NAME")
    g.add_argument("--pair", help="shorthand for --set pair=A,B")
    g.add_argument("--encoder", help="shorthand for --set encoder.kind=KIND")
    g.add_argument("--data", help="data directory for the selected dataset ('mlxtend' for the bundled MNIST sample)")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="fpqe", description="Quantum encoding benchmark harness")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train-ae", parents=[common], help="train the convolutional autoencoder")
    p.add_argument("--epochs", type=int, help="shorthand for --set ae.epochs=N")
    sub.add_parser("encode", parents=[common], help="write encoded registers for both splits")
    p = sub.add_parser("train-qnn", parents=[common], help="train the QNN on encoded registers")
    p.add_argument("--epochs", type=int, help="shorthand for --set qnn.epochs=N")
    sub.add_parser("evaluate", parents=[common], help="score a trained QNN and append to results.csv")
    p = sub.add_parser("fidelity", parents=[common], help="reconstruction MSE/PSNR/SSIM per encoder")
    p.add_argument("--encoders", help="comma-separated encoder kinds (default: config sweep.encoders)")
    p = sub.add_parser("reproduce", parents=[common], help="run a full table sweep")
    p.add_argument("--table", type=int, choices=(2, 3), required=True)
    p.add_argument("--scale", choices=("desk",), default="desk")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    flat: dict[str, str] = {}
    for item in args.overrides:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        flat[k.strip()] = v.strip()
    if args.dataset:
        flat["dataset"] = args.dataset
    if args.pair:
        flat["pair"] = args.pair
    if args.encoder:
        flat["encoder.kind"] = args.encoder
    if args.seed is not None:
        flat["seed"] = str(args.seed)
    if getattr(args, "epochs", None) is not None:
        flat["ae.epochs" if args.verb == "train-ae" else "qnn.epochs"] = str(args.epochs)
    if args.data:
        flat[f"data.{flat.get('dataset', cfg.dataset)}"] = args.data
    if args.out:
        flat["output_dir"] = str(args.out)
    return ExperimentConfig.from_flat(flat, base=cfg) if flat else cfg


def run(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = Path(cfg.output_dir)
    verb = args.verb
    if verb == "train-ae":
        ckpt = pl.train_ae(cfg, out, force=args.force)
        print(f"autoencoder checkpoint: {ckpt}")
        print(f"loss trace: {ckpt.parent / 'trace.csv'}")
    elif verb == "encode":
        d = pl.encode(cfg, out, force=args.force)
        print(f"encodings: {d}")
    elif verb == "train-qnn":
        ckpt = pl.train_qnn(cfg, out, force=args.force)
        print(f"qnn checkpoint: {ckpt}")
        print(f"trace: {ckpt.parent / 'qnn_trace.csv'}")
    elif verb == "evaluate":
        row = pl.evaluate(cfg, out)
        print(f"{row.dataset} {row.pair} {row.encoder}: accuracy {row.accuracy:.4f} "
              f"(class0 {row.acc_class0:.3f}, class1 {row.acc_class1:.3f}) ssim {row.ssim:.3f}")
        print(f"appended to {out / 'results.csv'}")
    elif verb == "fidelity":
        path = out / "fidelity.csv"
        pl._guard(path, args.force)
        kinds = tuple(k for k in args.encoders.split(",") if k) if args.encoders else None
        rows = pl.fidelity(cfg, out, kinds)
        pl.write_fidelity(path, rows)
        for r in rows:
            print(",".join(r[c] for c in pl.FIDELITY_COLUMNS))
        print(f"wrote {path}")
    elif verb == "reproduce":
        pl.reproduce(cfg, args.table, out)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        from threadpoolctl import threadpool_limits
        limiter = threadpool_limits(limits=args.threads)
    else:
        limiter = nullcontext()
    with limiter:
        try:
            return run(args)
        except (pl.OutputExistsError, pl.MissingCheckpointError, MissingDataError, ParseError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 2


if __name__ == "__main__":
    sys.exit(main())
