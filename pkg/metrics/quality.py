"""Single losses between image blocks, PSNR and SROCC.

Blocks are torch tensors shaped N x 3 x H x W (or 3 x H x W) holding Y, Cb, Cr
in [0, 1]. Every loss returns a scalar tensor in [0, 1] and is differentiable
with respect to both arguments.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from scipy.stats import spearmanr

from metrics.features import FeatureExtractor, default_extractor
from models import LossVector, PlanarFrame


logger = logging.getLogger(__name__)

UNDEFINED = float("nan")

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
MS_SSIM_SCALES = 4
_POW_FLOOR = 1e-8


def _check_pair(a: torch.Tensor, b: torch.Tensor):
    if a.shape != b.shape:
        raise ValueError(f"Shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.dim() == 3:
        a, b = a.unsqueeze(0), b.unsqueeze(0)
    if a.dim() != 4:
        raise ValueError(f"Expected N x C x H x W blocks, got shape {tuple(a.shape)}")
    return a, b


def l1_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean absolute pixel difference."""
    a, b = _check_pair(a, b)
    return (a - b).abs().mean()


def l2_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean squared pixel difference."""
    a, b = _check_pair(a, b)
    return ((a - b) ** 2).mean()


def _forward_differences(x: torch.Tensor):
    # replicate the last row/column so the final difference is zero
    padded_w = F.pad(x, (0, 1, 0, 0), mode="replicate")
    padded_h = F.pad(x, (0, 0, 0, 1), mode="replicate")
    dx = padded_w[..., :, 1:] - x
    dy = padded_h[..., 1:, :] - x
    return dx, dy


def gradient_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference of horizontal and vertical forward differences, halved."""
    a, b = _check_pair(a, b)
    dxa, dya = _forward_differences(a)
    dxb, dyb = _forward_differences(b)
    horizontal = (dxa - dxb).abs().mean()
    vertical = (dya - dyb).abs().mean()
    return (horizontal + vertical) / 4.0


def feature_loss(a: torch.Tensor, b: torch.Tensor,
                 extractor: Optional[FeatureExtractor] = None,
                 normalizer: float = 1.0) -> torch.Tensor:
    """Mean squared feature difference divided by normalizer, clamped to [0, 1]."""
    a, b = _check_pair(a, b)
    if normalizer <= 0:
        raise ValueError(f"Feature normalizer must be positive, got {normalizer}")
    extractor = extractor if extractor is not None else default_extractor()
    fa = extractor(a)
    fb = extractor(b)
    return torch.clamp(((fa - fb) ** 2).mean() / normalizer, 0.0, 1.0)


def _gaussian_kernel(dtype, device) -> torch.Tensor:
    coords = torch.arange(SSIM_WINDOW, dtype=dtype, device=device) - (SSIM_WINDOW - 1) / 2.0
    kernel = torch.exp(-(coords ** 2) / (2.0 * SSIM_SIGMA ** 2))
    return kernel / kernel.sum()


def _blur(x: torch.Tensor, kernel: torch.Tensor) -> torch.Tensor:
    channels = x.shape[1]
    horizontal = kernel.view(1, 1, 1, -1).repeat(channels, 1, 1, 1)
    vertical = kernel.view(1, 1, -1, 1).repeat(channels, 1, 1, 1)
    out = F.conv2d(x, horizontal, groups=channels)
    return F.conv2d(out, vertical, groups=channels)


def _select_channels(a: torch.Tensor, b: torch.Tensor, channel: str):
    if channel == "luma":
        return a[:, :1], b[:, :1]
    if channel == "mean":
        return a, b
    raise ValueError(f"SSIM channel mode must be 'luma' or 'mean', got {channel!r}")


def _ssim_terms(a: torch.Tensor, b: torch.Tensor):
    """Per-sample mean SSIM and contrast-structure terms."""
    if a.shape[-1] < SSIM_WINDOW or a.shape[-2] < SSIM_WINDOW:
        raise ValueError(
            f"Block {tuple(a.shape[-2:])} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    kernel = _gaussian_kernel(a.dtype, a.device)
    mu_a = _blur(a, kernel)
    mu_b = _blur(b, kernel)
    sigma_a = _blur(a * a, kernel) - mu_a ** 2
    sigma_b = _blur(b * b, kernel) - mu_b ** 2
    sigma_ab = _blur(a * b, kernel) - mu_a * mu_b

    cs_map = (2.0 * sigma_ab + SSIM_C2) / (sigma_a + sigma_b + SSIM_C2)
    ssim_map = (2.0 * mu_a * mu_b + SSIM_C1) / (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * cs_map
    return ssim_map.flatten(1).mean(1), cs_map.flatten(1).mean(1)


def ssim(a: torch.Tensor, b: torch.Tensor, channel: str = "luma") -> torch.Tensor:
    """Gaussian-window SSIM in [-1, 1], averaged over the batch."""
    a, b = _check_pair(a, b)
    a, b = _select_channels(a, b, channel)
    value, _ = _ssim_terms(a, b)
    return value.mean()


def ssim_loss(a: torch.Tensor, b: torch.Tensor, channel: str = "luma") -> torch.Tensor:
    return torch.clamp((1.0 - ssim(a, b, channel)) / 2.0, 0.0, 1.0)


def ms_ssim_weights(scales: int = MS_SSIM_SCALES) -> torch.Tensor:
    """Standard scale weights truncated to the first `scales` and renormalized."""
    if scales < 1 or scales > len(MS_SSIM_WEIGHTS):
        raise ValueError(f"MS-SSIM supports 1..{len(MS_SSIM_WEIGHTS)} scales, got {scales}")
    weights = torch.tensor(MS_SSIM_WEIGHTS[:scales], dtype=torch.float64)
    return weights / weights.sum()


def ms_ssim_min_size(scales: int = MS_SSIM_SCALES) -> int:
    return SSIM_WINDOW * 2 ** (scales - 1)


def ms_ssim(a: torch.Tensor, b: torch.Tensor, scales: int = MS_SSIM_SCALES,
            channel: str = "luma") -> torch.Tensor:
    """Multi-scale SSIM in [0, 1] with 2x average pooling between scales."""
    a, b = _check_pair(a, b)
    min_side = ms_ssim_min_size(scales)
    if min(a.shape[-2:]) < min_side:
        raise ValueError(
            f"MS-SSIM with {scales} scales needs blocks of at least {min_side}, got {tuple(a.shape[-2:])}"
        )
    a, b = _select_channels(a, b, channel)
    weights = ms_ssim_weights(scales).to(dtype=a.dtype, device=a.device)

    value = torch.ones(a.shape[0], dtype=a.dtype, device=a.device)
    for scale in range(scales):
        ssim_value, cs_value = _ssim_terms(a, b)
        term = ssim_value if scale == scales - 1 else cs_value
        value = value * torch.clamp(term, min=_POW_FLOOR) ** weights[scale]
        if scale < scales - 1:
            a = F.avg_pool2d(a, kernel_size=2)
            b = F.avg_pool2d(b, kernel_size=2)
    return torch.clamp(value.mean(), 0.0, 1.0)


def msssim_loss(a: torch.Tensor, b: torch.Tensor, scales: int = MS_SSIM_SCALES,
                channel: str = "luma") -> torch.Tensor:
    return 1.0 - ms_ssim(a, b, scales, channel)


def psnr_planes(x: np.ndarray, y: np.ndarray, peak: float) -> float:
    """PSNR in dB between two sample arrays, inf when identical."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"Plane shape mismatch: {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse)


def psnr(a: PlanarFrame, b: PlanarFrame) -> float:
    """Luma PSNR of two frames with identical geometry."""
    if a.geometry != b.geometry:
        raise ValueError(f"Frame geometry mismatch: {a.geometry} vs {b.geometry}")
    return psnr_planes(a.y, b.y, float(a.peak))


def srocc(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation, UNDEFINED for short or constant inputs."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ValueError(f"SROCC inputs differ in length: {xs.shape} vs {ys.shape}")
    if xs.size < 2 or np.ptp(xs) == 0 or np.ptp(ys) == 0:
        return UNDEFINED
    rho = spearmanr(xs, ys).correlation
    return float(np.clip(rho, -1.0, 1.0))


def measure_loss_vector(a: torch.Tensor, b: torch.Tensor,
                        extractor: Optional[FeatureExtractor] = None,
                        feature_normalizer: float = 1.0,
                        scales: int = MS_SSIM_SCALES,
                        channel: str = "luma") -> LossVector:
    """Evaluate the six single losses without gradients."""
    with torch.no_grad():
        values = [
            l1_loss(a, b),
            l2_loss(a, b),
            gradient_loss(a, b),
            feature_loss(a, b, extractor, feature_normalizer),
            ssim_loss(a, b, channel),
            msssim_loss(a, b, scales, channel),
        ]
    return LossVector.from_sequence([min(max(float(v), 0.0), 1.0) for v in values])
