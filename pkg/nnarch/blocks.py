"""Building blocks: Mish, attention (ECBAM), non-local (ERNB) and Mul2Res."""

import logging
from typing import Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F


logger = logging.getLogger(__name__)

BRANCH_KERNELS: Sequence[int] = (1, 3, 5, 7)


def mish(x):
    """x * tanh(softplus(x)) for tensors, arrays or scalars."""
    if isinstance(x, torch.Tensor):
        return F.mish(x)
    tensor = torch.as_tensor(x, dtype=torch.float64)
    out = F.mish(tensor)
    return float(out) if out.dim() == 0 else out.numpy()


def conv(in_channels: int, out_channels: int, kernel_size: int, stride: int = 1) -> nn.Conv2d:
    return nn.Conv2d(in_channels, out_channels, kernel_size, stride, padding=kernel_size // 2)


class ECBAM(nn.Module):
    """Channel then spatial attention, fused with the input by a 1x1 conv over the concatenation."""

    def __init__(self, channels: int, reduction: int = 16, spatial_kernel: int = 7):
        super().__init__()
        if reduction < 1 or channels % reduction:
            raise ValueError(f"ECBAM channels {channels} not divisible by reduction {reduction}")
        self.channels = channels
        hidden = channels // reduction
        self.channel_mlp = nn.Sequential(
            nn.Conv2d(channels, hidden, 1),
            nn.Mish(),
            nn.Conv2d(hidden, channels, 1),
        )
        self.spatial_conv = conv(2, 1, spatial_kernel)
        self.fusion = nn.Conv2d(2 * channels, channels, 1)

    def channel_gate(self, x: torch.Tensor) -> torch.Tensor:
        avg = self.channel_mlp(F.adaptive_avg_pool2d(x, 1))
        peak = self.channel_mlp(F.adaptive_max_pool2d(x, 1))
        return torch.sigmoid(avg + peak)

    def spatial_gate(self, x: torch.Tensor) -> torch.Tensor:
        maps = torch.cat([x.mean(dim=1, keepdim=True), x.amax(dim=1, keepdim=True)], dim=1)
        return torch.sigmoid(self.spatial_conv(maps))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.channels:
            raise ValueError(f"ECBAM expects {self.channels} channels, got {x.shape[1]}")
        gated = x * self.channel_gate(x)
        gated = gated * self.spatial_gate(gated)
        return self.fusion(torch.cat([gated, x], dim=1))


class ResidualBranch(nn.Module):
    """conv - Mish - conv with an identity shortcut."""

    def __init__(self, channels: int, kernel_size: int):
        super().__init__()
        self.body = nn.Sequential(
            conv(channels, channels, kernel_size),
            nn.Mish(),
            conv(channels, channels, kernel_size),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class ERNB(nn.Module):
    """Embedded dot-product non-local block with concatenation fusion and a long skip.

    Keys and values can be max-pooled by `pool` to shrink the affinity matrix.
    """

    def __init__(self, channels: int, pool: int = 1):
        super().__init__()
        if channels < 2:
            raise ValueError(f"ERNB needs at least 2 channels, got {channels}")
        self.inner = channels // 2
        self.pool = pool
        self.theta = nn.Conv2d(channels, self.inner, 1)
        self.phi = nn.Conv2d(channels, self.inner, 1)
        self.g = nn.Conv2d(channels, self.inner, 1)
        self.merge = nn.Conv2d(channels + self.inner, channels, 1)
        self.residual = ResidualBranch(channels, 3)
        self.fusion = nn.Conv2d(channels, channels, 1)

    def _keys(self, projected: torch.Tensor) -> torch.Tensor:
        if self.pool > 1:
            projected = F.max_pool2d(projected, self.pool, ceil_mode=True)
        return projected.flatten(2)

    def affinity(self, x: torch.Tensor) -> torch.Tensor:
        """Softmax over key positions; B x HW x H'W', rows sum to 1."""
        queries = self.theta(x).flatten(2).transpose(1, 2)
        keys = self._keys(self.phi(x))
        return F.softmax(torch.bmm(queries, keys), dim=-1)

    def non_local(self, x: torch.Tensor) -> torch.Tensor:
        batch, _, height, width = x.shape
        values = self._keys(self.g(x)).transpose(1, 2)
        y = torch.bmm(self.affinity(x), values)
        return y.transpose(1, 2).reshape(batch, self.inner, height, width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        merged = F.mish(self.merge(torch.cat([x, self.non_local(x)], dim=1)))
        return x + self.fusion(self.residual(merged))


class Mul2ResBranch(nn.Module):
    """Level-1 branch: leading conv, four residual sub-branches, ECBAM, 1x1 squeeze.

    The sub-branches concatenate back to `width` channels; the squeeze after
    ECBAM returns to width // 4 so the four level-1 outputs concatenate to
    `width` again.
    """

    def __init__(self, width: int, kernel_size: int, reduction: int):
        super().__init__()
        quarter = width // 4
        self.lead = conv(width, quarter, kernel_size)
        self.sub_branches = nn.ModuleList(ResidualBranch(quarter, k) for k in BRANCH_KERNELS)
        self.attention = ECBAM(width, reduction)
        self.squeeze = nn.Conv2d(width, quarter, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        lead = F.mish(self.lead(x))
        merged = torch.cat([branch(lead) for branch in self.sub_branches], dim=1)
        return F.mish(self.squeeze(self.attention(merged)))


class Mul2Res(nn.Module):
    """Two-level multi-branch residual block with kernels 1/3/5/7 at both levels."""

    def __init__(self, width: int, reduction: int = 16):
        super().__init__()
        if width < 4 or width % 4:
            raise ValueError(f"Mul2Res width must be a positive multiple of 4, got {width}")
        self.branches = nn.ModuleList(Mul2ResBranch(width, k, reduction) for k in BRANCH_KERNELS)
        self.attention = ECBAM(width, reduction)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        merged = torch.cat([branch(x) for branch in self.branches], dim=1)
        return x + self.attention(merged)


def zero_init(module: nn.Module) -> nn.Module:
    """Set every conv/linear weight and bias in module to zero."""
    for layer in module.modules():
        if isinstance(layer, (nn.Conv2d, nn.Linear)):
            nn.init.zeros_(layer.weight)
            if layer.bias is not None:
                nn.init.zeros_(layer.bias)
    return module
