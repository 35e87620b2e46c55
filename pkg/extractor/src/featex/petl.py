"""Parameter-efficient adaptation modules injected into a vision transformer.

Three methods, all leaving the backbone body weights untouched:

- ``adaptformer``: a parallel bottleneck adapter (projected dimension 64)
  beside each block's MLP, zero-initialized so injection is a no-op before
  training.
- ``ssf``: learnable per-channel scale and shift after each block's
  attention and MLP outputs, identity-initialized.
- ``vpt``: deep visual prompts, 5 learnable tokens prepended to every
  encoder layer's input and stripped from its output.
"""

from __future__ import annotations

import torch
from torch import nn


class BottleneckAdapter(nn.Module):
    def __init__(self, dim: int, bottleneck: int = 64, scale: float = 0.1):
        super().__init__()
        self.down = nn.Linear(dim, bottleneck)
        self.up = nn.Linear(bottleneck, dim)
        self.scale = scale
        nn.init.zeros_(self.up.weight)
        nn.init.zeros_(self.up.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.scale * self.up(torch.relu(self.down(x)))


class AdapterBlock(nn.Module):
    """Encoder block with a parallel adapter on the MLP branch."""

    def __init__(self, block: nn.Module, bottleneck: int = 64):
        super().__init__()
        self.block = block
        dim = block.ln_1.normalized_shape[0]
        self.adapter = BottleneckAdapter(dim, bottleneck)

    def forward(self, input: torch.Tensor) -> torch.Tensor:
        b = self.block
        x = b.ln_1(input)
        x, _ = b.self_attention(x, x, x, need_weights=False)
        x = b.dropout(x)
        x = x + input
        y_in = b.ln_2(x)
        return x + b.mlp(y_in) + self.adapter(y_in)


class ScaleShift(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.gamma = nn.Parameter(torch.ones(dim))
        self.beta = nn.Parameter(torch.zeros(dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.gamma + self.beta


class SsfBlock(nn.Module):
    """Encoder block with scale-shift modulation of both residual branches."""

    def __init__(self, block: nn.Module):
        super().__init__()
        self.block = block
        dim = block.ln_1.normalized_shape[0]
        self.ss_attn = ScaleShift(dim)
        self.ss_mlp = ScaleShift(dim)

    def forward(self, input: torch.Tensor) -> torch.Tensor:
        b = self.block
        x = b.ln_1(input)
        x, _ = b.self_attention(x, x, x, need_weights=False)
        x = b.dropout(x)
        x = self.ss_attn(x) + input
        y = b.mlp(b.ln_2(x))
        return x + self.ss_mlp(y)


class VptEncoder(nn.Module):
    """Deep visual prompting: fresh prompt tokens at every layer."""

    def __init__(self, encoder: nn.Module, num_prompts: int = 5):
        super().__init__()
        self.encoder = encoder
        num_layers = len(encoder.layers)
        dim = encoder.ln.normalized_shape[0]
        self.prompts = nn.Parameter(
            0.02 * torch.randn(num_layers, num_prompts, dim))

    def forward(self, input: torch.Tensor) -> torch.Tensor:
        enc = self.encoder
        x = enc.dropout(input + enc.pos_embedding)
        P = self.prompts.shape[1]
        for i, layer in enumerate(enc.layers):
            p = self.prompts[i].unsqueeze(0).expand(x.shape[0], -1, -1)
            x = torch.cat([x[:, :1], p, x[:, 1:]], dim=1)
            x = layer(x)
            x = torch.cat([x[:, :1], x[:, 1 + P:]], dim=1)
        return enc.ln(x)


def inject(vit: nn.Module, method: str) -> list[nn.Parameter]:
    """Inject the chosen adaptation into a torchvision VisionTransformer,
    freeze everything else, and return the injected parameters."""
    for p in vit.parameters():
        p.requires_grad_(False)

    if method == "none":
        return []
    if method == "adaptformer":
        vit.encoder.layers = nn.Sequential(
            *[AdapterBlock(b) for b in vit.encoder.layers])
        injected = [m.adapter for m in vit.encoder.layers]
        params = [p for m in injected for p in m.parameters()]
    elif method == "ssf":
        vit.encoder.layers = nn.Sequential(
            *[SsfBlock(b) for b in vit.encoder.layers])
        params = [p for m in vit.encoder.layers
                  for p in list(m.ss_attn.parameters())
                  + list(m.ss_mlp.parameters())]
    elif method == "vpt":
        vit.encoder = VptEncoder(vit.encoder)
        params = [vit.encoder.prompts]
    else:
        raise ValueError(f"unknown adaptation method {method!r}")

    for p in params:
        p.requires_grad_(True)
    return params
