"""Batch feature extraction into the feature-store format."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from . import backbones, storefmt
from .config import ExtractorConfig


def _load_datasets(config: ExtractorConfig, image_size: int) -> dict[str, Dataset]:
    from torchvision import datasets

    tf = backbones.eval_transform(image_size)
    root = config.data_root
    if config.dataset == "cifar100":
        try:
            return {
                "train": datasets.CIFAR100(root, train=True, transform=tf),
                "val": datasets.CIFAR100(root, train=False, transform=tf),
            }
        except RuntimeError as exc:
            raise FileNotFoundError(
                f"CIFAR100 not found under {root!r}; download it there first "
                f"({exc})") from exc
    splits = {}
    for split in ("train", "val"):
        split_dir = Path(root) / split
        if not split_dir.is_dir():
            raise FileNotFoundError(f"missing image folder {split_dir}")
        splits[split] = datasets.ImageFolder(split_dir, transform=tf)
    return splits


@torch.no_grad()
def extract_features(model: torch.nn.Module, dataset: Dataset,
                     batch_size: int = 64,
                     device: str = "cpu") -> tuple[np.ndarray, np.ndarray]:
    """Run the feature model over a dataset in eval mode; returns (F, labels)
    in dataset order."""
    model.eval()
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False)
    feats, labels = [], []
    for x, y in loader:
        feats.append(model(x.to(device)).cpu().numpy())
        labels.append(np.asarray(y))
    if not feats:
        return (np.zeros((0, model.feature_dim), dtype=np.float32),
                np.zeros(0, dtype=np.int64))
    return np.concatenate(feats), np.concatenate(labels)


def extract(config: ExtractorConfig,
            datasets: dict[str, Dataset] | None = None,
            model: torch.nn.Module | None = None) -> Path:
    """Extract features for every split and write a feature store at
    ``config.output``. ``datasets`` and ``model`` override the config-driven
    loading (used for adapted backbones and in-memory test data)."""
    if model is None:
        model = backbones.build(config)
    if datasets is None:
        datasets = _load_datasets(config, model.image_size)

    splits = {}
    for split, ds in datasets.items():
        F, labels = extract_features(model, ds, config.batch_size,
                                     config.device)
        splits[split] = (F, labels)

    K = 1 + max(int(labels.max()) for _, labels in splits.values()
                if len(labels))
    out = Path(config.output)
    storefmt.write_store(out, splits, name=config.name, K=K)
    return out
