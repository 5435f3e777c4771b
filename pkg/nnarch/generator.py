"""Enhancement generator for 96x96 YCbCr 4:4:4 blocks."""

import logging

import torch
import torch.nn as nn
import torch.nn.functional as F

from models import NetConfig
from nnarch.blocks import ERNB, Mul2Res, conv, zero_init


logger = logging.getLogger(__name__)

TAIL_INIT_SCALE = 0.1


class CVENet(nn.Module):
    """Head conv, ERNB, cascaded Mul2Res blocks, ERNB, tail conv, global skip."""

    def __init__(self, cfg: NetConfig, identity_init: bool = False):
        super().__init__()
        self.cfg = cfg
        width = cfg.width
        self.head = conv(3, width, 3)
        self.ernb_in = ERNB(width, cfg.nonlocal_pool)
        self.blocks = nn.ModuleList(Mul2Res(width, cfg.ecbam_reduction) for _ in range(cfg.num_mul2res))
        # cascade i sees the first block input plus the outputs of blocks 0..i
        self.cascades = nn.ModuleList(
            nn.Conv2d(width * (i + 2), width, 1) for i in range(cfg.num_mul2res)
        )
        self.ernb_out = ERNB(width, cfg.nonlocal_pool)
        self.tail = conv(width, 3, 3)

        if identity_init:
            zero_init(self.tail)
        else:
            with torch.no_grad():
                self.tail.weight.mul_(TAIL_INIT_SCALE)
                self.tail.bias.zero_()

    def check_geometry(self, x: torch.Tensor) -> None:
        size = self.cfg.block_size
        if x.dim() != 4 or x.shape[1] != 3 or x.shape[2] != size or x.shape[3] != size:
            raise ValueError(f"Generator expects B x 3 x {size} x {size} blocks, got {tuple(x.shape)}")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_geometry(x)
        features = self.ernb_in(F.mish(self.head(x)))
        cascade = [features]
        for block, squeeze in zip(self.blocks, self.cascades):
            cascade.append(block(features))
            features = F.mish(squeeze(torch.cat(cascade, dim=1)))
        out = x + self.tail(self.ernb_out(features))
        if not self.training:
            out = torch.clamp(out, 0.0, 1.0)
        return out


def build_generator(cfg: NetConfig, identity_init: bool = False) -> CVENet:
    """Seeded generator construction."""
    torch.manual_seed(cfg.seed)
    model = CVENet(cfg, identity_init=identity_init)
    logger.debug(f"Built generator width={cfg.width} blocks={cfg.num_mul2res} identity_init={identity_init}")
    return model


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
