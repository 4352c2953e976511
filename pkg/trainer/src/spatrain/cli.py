"""Command-line entry points: train a network on a dataset directory and
export predictions for evaluation."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import ContainerError, load_split
from .net import NetConfig, build_net
from .predict import export_predictions, load_checkpoint, save_checkpoint
from .train import TrainConfig, train


def cmd_train(args) -> int:
    arch_channels = {"hybrid": 2, "mse": 1}
    net_cfg = NetConfig(
        depth=args.depth,
        base_channels=args.base_channels,
        out_channels=arch_channels[args.arch],
    )
    train_cfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        early_stop_patience=args.patience,
        seg_loss_kind=args.seg_loss,
        seed=args.seed,
    )
    train_data = load_split(args.data, "train")
    val_data = load_split(args.data, "val")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    model = build_net(net_cfg)
    result = train(model, train_data, val_data, train_cfg, out / "train_log.csv")
    save_checkpoint(model, out / "checkpoint.pt")
    print(
        f"best val loss {result.best_val_loss:.6g} at epoch "
        f"{result.best_epoch}/{result.n_epochs}"
    )
    return 0


def cmd_predict(args) -> int:
    model = load_checkpoint(args.checkpoint)
    ids = export_predictions(model, args.data, args.out, split=args.split)
    print(f"exported {len(ids)} predictions to {args.out}/pred")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="spatrain")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a network on a dataset directory")
    t.add_argument("--data", required=True)
    t.add_argument("--arch", choices=("hybrid", "mse"), default="hybrid")
    t.add_argument("--out", required=True)
    t.add_argument("--depth", type=int, default=4)
    t.add_argument("--base-channels", type=int, default=32)
    t.add_argument("--lr", type=float, default=0.0005)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--epochs", type=int, default=1000)
    t.add_argument("--patience", type=int, default=50)
    t.add_argument("--seg-loss", choices=("dice", "mse"), default="dice")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="export predictions for evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split")
    p.set_defaults(func=cmd_predict)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ContainerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
