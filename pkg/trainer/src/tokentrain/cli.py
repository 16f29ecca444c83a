"""Command-line entry: train on a manifest, write metrics JSON."""

from __future__ import annotations

import argparse
import json
import sys

from .data import load_manifest
from .train import train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tokentrain",
                                     description="Train a linear classifier "
                                                 "over face-token exports")
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--epochs", type=int, default=300)
    parser.add_argument("--lr", type=float, default=0.5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mode", choices=("model", "face"), default="model")
    parser.add_argument("--mask-schedule", default="0",
                        help="comma-separated mask ratios, e.g. 0,0.25,0.5")
    parser.add_argument("--out", default=None, help="metrics JSON path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        dataset = load_manifest(args.manifest)
        schedule = [float(x) for x in args.mask_schedule.split(",") if x != ""]
        result = train(dataset, epochs=args.epochs, mask_schedule=schedule,
                       seed=args.seed, lr=args.lr, mode=args.mode)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    payload = json.dumps(result.metrics, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
