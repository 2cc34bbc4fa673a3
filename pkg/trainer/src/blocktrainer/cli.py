"""Command line for the reference trainer."""

from __future__ import annotations

import argparse
import sys

from .server import TrainerConfig, serve_forever


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="blocktrainer",
        description="Reference wire-protocol trainer for block-composed nets",
    )
    sub = p.add_subparsers(dest="cmd", required=True)
    srv = sub.add_parser("serve", help="serve evaluation requests until stopped")
    srv.add_argument("--listen", default="127.0.0.1:7878", help="host:port")
    srv.add_argument("--dataset", default="synthetic",
                     help="default dataset: mnist | synthetic (alias custom)")
    srv.add_argument("--scale", choices=["desk", "paper"], default="desk")
    srv.add_argument("--data-dir", dest="data_dir",
                     help="directory with MNIST IDX files")
    srv.add_argument("--train-size", type=int, default=5000, dest="train_size")
    srv.add_argument("--val-size", type=int, default=1000, dest="val_size")
    srv.add_argument("--seed", type=int, default=0)
    srv.add_argument("--export-cmd", dest="export_cmd",
                     help="override the graph export command")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = TrainerConfig(
        dataset=args.dataset,
        data_dir=args.data_dir,
        scale=args.scale,
        train_size=args.train_size,
        val_size=args.val_size,
        seed=args.seed,
        export_cmd=args.export_cmd,
    )
    try:
        serve_forever(args.listen, cfg)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
