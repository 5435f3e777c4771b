"""Feature extractors for the feature-space loss."""

import logging
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F
from torchvision.models import VGG19_Weights, vgg19

from models import FEATURE_EXTRACTORS


logger = logging.getLogger(__name__)


class FeatureExtractor(nn.Module):
    """Deterministic map from N x 3 x H x W blocks to feature maps."""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError


class IdentityExtractor(FeatureExtractor):
    """Features are the pixels themselves."""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x


class RandomConvExtractor(FeatureExtractor):
    """Frozen three-layer convolutional stack with seeded random weights.

    Weights are buffers, never parameters, so the extractor stays fixed while
    a generator trains against it.
    """

    def __init__(self, seed: int = 0, channels: int = 16):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        shapes = [(channels // 2, 3), (channels, channels // 2), (channels, channels)]
        for index, (out_ch, in_ch) in enumerate(shapes):
            bound = (6.0 / (in_ch * 9)) ** 0.5
            weight = (torch.rand(out_ch, in_ch, 3, 3, generator=gen) * 2 - 1) * bound
            self.register_buffer(f"weight{index}", weight)
        self.strides = (1, 2, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = x
        for index, stride in enumerate(self.strides):
            weight = getattr(self, f"weight{index}").to(dtype=x.dtype, device=x.device)
            out = F.conv2d(out, weight, stride=stride, padding=1)
            if index < len(self.strides) - 1:
                out = F.relu(out)
        return out


class Vgg19Extractor(FeatureExtractor):
    """VGG19 features up to the fourth conv of the fifth stage, after activation."""

    def __init__(self, pretrained: bool = True):
        super().__init__()
        weights = VGG19_Weights.IMAGENET1K_V1 if pretrained else None
        vgg = vgg19(weights=weights).features
        self.features = nn.Sequential(*list(vgg.children())[:36])
        self.features.eval()
        for param in self.features.parameters():
            param.requires_grad = False

        # ImageNet normalization parameters
        self.register_buffer("mean", torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1))
        logger.info(f"VGG19 feature extractor ready (pretrained={pretrained})")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mean = self.mean.to(dtype=x.dtype)
        std = self.std.to(dtype=x.dtype)
        return self.features.to(dtype=x.dtype)((x - mean) / std)


def build_extractor(name: str = "random", seed: int = 0,
                    pretrained: bool = True) -> FeatureExtractor:
    """Build an extractor by name: identity, random or vgg19."""
    if name == "identity":
        return IdentityExtractor()
    if name == "random":
        return RandomConvExtractor(seed=seed)
    if name == "vgg19":
        return Vgg19Extractor(pretrained=pretrained)
    raise ValueError(f"Unknown feature extractor {name!r}, expected one of {FEATURE_EXTRACTORS}")


_default: Optional[FeatureExtractor] = None


def default_extractor() -> FeatureExtractor:
    """Shared fixed-seed random extractor."""
    global _default
    if _default is None:
        _default = RandomConvExtractor(seed=0)
    return _default
