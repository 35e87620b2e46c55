"""Backbone construction and feature heads.

All feature models are ``nn.Module``s whose forward maps an image batch to
an (N, L) feature matrix: the pre-head class-token embedding for vision
transformers, the pooled penultimate activation for ResNets.
"""

from __future__ import annotations

import torch
from torch import nn
from torchvision import models, transforms
from torchvision.models.vision_transformer import VisionTransformer

from . import petl
from .config import ExtractorConfig

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class ViTFeatures(nn.Module):
    """Class-token embedding of a VisionTransformer, pre-classifier."""

    def __init__(self, vit: VisionTransformer):
        super().__init__()
        self.vit = vit
        self.feature_dim = vit.hidden_dim
        self.image_size = vit.image_size
        self.petl_params: list[nn.Parameter] = []

    def adapt(self, method: str) -> list[nn.Parameter]:
        self.petl_params = petl.inject(self.vit, method)
        return self.petl_params

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        v = self.vit
        x = v._process_input(x)
        cls = v.class_token.expand(x.shape[0], -1, -1)
        x = torch.cat([cls, x], dim=1)
        x = v.encoder(x)
        return x[:, 0]


class ResNetFeatures(nn.Module):
    """Global-average-pooled penultimate ResNet activation."""

    def __init__(self, resnet: nn.Module, feature_dim: int):
        super().__init__()
        self.body = nn.Sequential(*list(resnet.children())[:-1])
        self.feature_dim = feature_dim
        self.image_size = 224
        self.petl_params: list[nn.Parameter] = []

    def adapt(self, method: str) -> list[nn.Parameter]:
        if method != "none":
            raise ValueError("adaptation is only supported for transformer "
                             "backbones")
        for p in self.parameters():
            p.requires_grad_(False)
        return []

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.flatten(self.body(x), 1)


def _tiny_vit() -> VisionTransformer:
    """Desk-scale transformer for tests: same architecture family, tiny."""
    return VisionTransformer(image_size=32, patch_size=8, num_layers=2,
                             num_heads=2, hidden_dim=32, mlp_dim=64,
                             num_classes=10)


def build(config: ExtractorConfig) -> nn.Module:
    name = config.backbone
    if name == "tiny_vit":
        torch.manual_seed(config.seed)
        model = ViTFeatures(_tiny_vit())
    elif name in ("vit_b_16", "vit_b_16_in1k"):
        weights = models.ViT_B_16_Weights.IMAGENET1K_V1 if config.pretrained else None
        model = ViTFeatures(models.vit_b_16(weights=weights))
    elif name == "resnet50":
        weights = models.ResNet50_Weights.IMAGENET1K_V2 if config.pretrained else None
        model = ResNetFeatures(models.resnet50(weights=weights), 2048)
    elif name == "resnet152":
        weights = models.ResNet152_Weights.IMAGENET1K_V2 if config.pretrained else None
        model = ResNetFeatures(models.resnet152(weights=weights), 2048)
    else:
        raise ValueError(f"unknown backbone {name!r}")
    model.adapt(config.petl)
    return model.to(config.device)


def eval_transform(image_size: int = 224) -> transforms.Compose:
    """Deterministic preprocessing for extraction: resize, center crop,
    normalize."""
    return transforms.Compose([
        transforms.Resize(int(image_size * 256 / 224)),
        transforms.CenterCrop(image_size),
        transforms.ToTensor(),
        transforms.Normalize(IMAGENET_MEAN, IMAGENET_STD),
    ])


def train_transform(image_size: int = 224) -> transforms.Compose:
    """Augmented preprocessing for first-session adaptation."""
    return transforms.Compose([
        transforms.RandomResizedCrop(image_size),
        transforms.RandomHorizontalFlip(),
        transforms.ToTensor(),
        transforms.Normalize(IMAGENET_MEAN, IMAGENET_STD),
    ])
