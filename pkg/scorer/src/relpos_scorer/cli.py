"""CLI: train a checkpoint, export score files."""

from __future__ import annotations

import argparse
import sys

from .export import ALL_CENTRALS, KNOWN_CENTRAL, export_scores
from .model import COMBINATIONS
from .train import TrainConfig, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relpos-scorer",
        description="Train the relative-position classifier and export "
                    "score files for the reassembly solver.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("train")
    p.add_argument("--data", required=True, help="training fragment sets")
    p.add_argument("--val", required=True, help="validation fragment sets")
    p.add_argument("--classes", type=int, choices=[2, 8, 9], default=8)
    p.add_argument("--combination", choices=list(COMBINATIONS), default="kron")
    p.add_argument("--out-dim", type=int, default=512)
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--pairs-per-epoch", type=int, default=2000)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--early-stop", type=float, default=None,
                   help="stop once validation accuracy reaches this")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--log", default=None)

    p = sub.add_parser("export")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True, help="one fragment-set dir")
    p.add_argument("--variant", choices=[KNOWN_CENTRAL, ALL_CENTRALS],
                   default=KNOWN_CENTRAL)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.subcommand == "train":
        config = TrainConfig(
            data_dir=args.data, val_dir=args.val, classes=args.classes,
            combination=args.combination, out_dim=args.out_dim,
            epochs=args.epochs, pairs_per_epoch=args.pairs_per_epoch,
            batch_size=args.batch_size, lr=args.lr, seed=args.seed,
            early_stop_accuracy=args.early_stop)
        log = train(config, args.checkpoint, args.log)
        print(f"final validation accuracy: "
              f"{log['epochs'][-1]['val_accuracy']:.3f}")
        return 0
    export_scores(args.checkpoint, args.manifest, args.variant, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
