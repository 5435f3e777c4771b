"""Feature-point discriminator: strided conv stack with two non-local blocks and no output activation."""

import logging
from typing import List, Optional, Tuple

import torch
import torch.nn as nn

from models import NetConfig
from nnarch.blocks import ERNB


logger = logging.getLogger(__name__)


def _conv_bn(in_channels: int, out_channels: int, stride: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, 3, stride, padding=1),
        nn.BatchNorm2d(out_channels),
        nn.LeakyReLU(0.2, inplace=True),
    )


def _layer_specs(w: int) -> List[Tuple[int, int, int]]:
    return [
        (w, w, 2),
        (w, 2 * w, 1),
        (2 * w, 2 * w, 2),
        (2 * w, 4 * w, 1),
        (4 * w, 4 * w, 2),
        (4 * w, 8 * w, 1),
    ]


class FeatureDiscriminator(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.disc_width
        self.head = nn.Sequential(
            nn.Conv2d(3, w, 3, 1, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
        )
        self.ernb_in = ERNB(w, cfg.nonlocal_pool)
        self.body = nn.Sequential(*(_conv_bn(i, o, s) for i, o, s in _layer_specs(w)))
        self.ernb_out = ERNB(8 * w, cfg.nonlocal_pool)
        self.final = _conv_bn(8 * w, 8 * w, 2)
        side = cfg.block_size // 16
        self.project = nn.Linear(8 * w * side * side, cfg.feature_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        size = self.cfg.block_size
        if x.dim() != 4 or x.shape[1] != 3 or x.shape[2] != size or x.shape[3] != size:
            raise ValueError(f"Discriminator expects B x 3 x {size} x {size} blocks, got {tuple(x.shape)}")
        features = self.ernb_in(self.head(x))
        features = self.final(self.ernb_out(self.body(features)))
        return self.project(features.flatten(1))


def build_discriminator(cfg: NetConfig, seed: Optional[int] = None) -> FeatureDiscriminator:
    torch.manual_seed(cfg.seed if seed is None else seed)
    return FeatureDiscriminator(cfg)
