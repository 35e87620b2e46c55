"""Extraction and first-session training configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

BACKBONES = ("vit_b_16", "vit_b_16_in1k", "resnet50", "resnet152", "tiny_vit")
PETL_METHODS = ("none", "adaptformer", "ssf", "vpt")
DATASETS = ("cifar100", "folder")


@dataclass
class FirstSessionHyperparams:
    epochs: int = 20
    batch_size: int = 48
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4


@dataclass
class ExtractorConfig:
    backbone: str = "vit_b_16"
    dataset: str = "cifar100"
    data_root: str = "data"
    output: str = "store"
    name: str = "features"
    pretrained: bool = True
    device: str = "cpu"
    batch_size: int = 64
    seed: int = 0
    petl: str = "none"
    first_task_classes: list[int] | None = None
    first_session: FirstSessionHyperparams = field(
        default_factory=FirstSessionHyperparams)

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {self.backbone!r}")
        if self.petl not in PETL_METHODS:
            raise ValueError(f"unknown adaptation method {self.petl!r}")
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.petl != "none" and not self.first_task_classes:
            raise ValueError(
                "adaptation requires the list of first-task classes")
        if isinstance(self.first_session, dict):
            self.first_session = FirstSessionHyperparams(**self.first_session)
