"""Command-line entry point: extract features, optionally after
first-session adaptation."""

from __future__ import annotations

import argparse
import sys

from . import backbones, extract, train
from .config import ExtractorConfig, FirstSessionHyperparams


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="featex",
        description="Export backbone features into a feature store.")
    p.add_argument("output", help="store directory to write")
    p.add_argument("--backbone", default="vit_b_16")
    p.add_argument("--dataset", default="cifar100")
    p.add_argument("--data-root", default="data")
    p.add_argument("--name", default="features")
    p.add_argument("--no-pretrained", action="store_true")
    p.add_argument("--device", default="cpu")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--petl", default="none",
                   choices=("none", "adaptformer", "ssf", "vpt"))
    p.add_argument("--first-task-classes", type=int, nargs="*", default=None)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.01)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ExtractorConfig(
            backbone=args.backbone, dataset=args.dataset,
            data_root=args.data_root, output=args.output, name=args.name,
            pretrained=not args.no_pretrained, device=args.device,
            batch_size=args.batch_size, seed=args.seed, petl=args.petl,
            first_task_classes=args.first_task_classes,
            first_session=FirstSessionHyperparams(epochs=args.epochs,
                                                  lr=args.lr),
        )
        model = backbones.build(config)
        if config.petl != "none":
            from torchvision import datasets

            tf = backbones.train_transform(model.image_size)
            if config.dataset == "cifar100":
                train_ds = datasets.CIFAR100(config.data_root, train=True,
                                             transform=tf)
            else:
                train_ds = datasets.ImageFolder(
                    f"{config.data_root}/train", transform=tf)
            trace = train.first_session_train(model, train_ds, config)
            print(f"adaptation losses: {trace['losses']}")
        out = extract.extract(config, model=model)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote feature store at {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
