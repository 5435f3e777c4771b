"""Weighted combination of transformed single losses."""

import logging
from typing import Callable, Dict, Optional

import torch
import torch.nn as nn

from losscal.transforms import apply_numpy, apply_torch
from metrics.features import FeatureExtractor
from metrics.quality import (
    gradient_loss, feature_loss, l1_loss, l2_loss, msssim_loss, ssim_loss
)
from models import LOSS_NAMES, LossSpec, LossVector


logger = logging.getLogger(__name__)

# ln-combination of l1, l2, ssim and ms-ssim losses selected by calibration
PERCEPTUAL_SPEC = LossSpec("ln", (0.3, 0.1, 0.0, 0.0, 0.2, 0.4))


def combined_loss(spec: LossSpec, lv: LossVector) -> float:
    """Sum of a_i * f(L_i) for a measured loss vector."""
    transformed = apply_numpy(spec.transform_id, lv.as_array())
    return float(sum(w * t for w, t in zip(spec.weights, transformed) if w != 0.0))


class CombinedLoss(nn.Module):
    """Differentiable combined loss for any LossSpec."""

    def __init__(self, spec: LossSpec = PERCEPTUAL_SPEC,
                 extractor: Optional[FeatureExtractor] = None,
                 feature_normalizer: float = 1.0):
        super().__init__()
        self.spec = spec
        self.extractor = extractor
        self.feature_normalizer = feature_normalizer
        self._losses: Dict[str, Callable[[torch.Tensor, torch.Tensor], torch.Tensor]] = {
            "l1": l1_loss,
            "l2": l2_loss,
            "grad": gradient_loss,
            "feat": lambda a, b: feature_loss(a, b, self.extractor, self.feature_normalizer),
            "ssim_loss": ssim_loss,
            "msssim_loss": msssim_loss,
        }

    def forward(self, output: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
        total = output.new_zeros(())
        for name, weight in zip(LOSS_NAMES, self.spec.weights):
            if weight == 0.0:
                continue
            value = self._losses[name](output, target)
            total = total + weight * apply_torch(self.spec.transform_id, value)
        return total


_perceptual = CombinedLoss(PERCEPTUAL_SPEC)


def perceptual_loss_lp(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """ln-weighted perceptual loss; equals ln(1e-8) for identical blocks."""
    return _perceptual(a, b)
