"""Inverse stereographic projection and geodesic moment distances.

Feature points live in R^n along the last tensor dimension; the sphere is
the unit n-sphere in R^(n+1) with north pole N = (0, ..., 0, 1).
"""

import math

import numpy as np
import torch


CLAMP_DELTA = 1e-7


def as_tensor(x) -> torch.Tensor:
    """Wrap array-likes as float64 tensors, rejecting non-finite entries."""
    tensor = x if isinstance(x, torch.Tensor) else torch.as_tensor(np.asarray(x, dtype=np.float64))
    if not torch.isfinite(tensor).all():
        raise ValueError("Feature points must be finite")
    return tensor


def inverse_stereographic(x) -> torch.Tensor:
    """Map R^n onto the unit n-sphere: (2x, r^2 - 1) / (r^2 + 1)."""
    x = as_tensor(x)
    sq = (x * x).sum(dim=-1, keepdim=True)
    return torch.cat([2.0 * x, sq - 1.0], dim=-1) / (sq + 1.0)


def north_pole_distance(x, m: int = 1) -> torch.Tensor:
    """m-th power of the geodesic angle between N and T(x).

    arccos((r^2 - 1) / (r^2 + 1)) equals pi - 2 arctan(r), which stays
    accurate near both poles.
    """
    if m < 1:
        raise ValueError(f"Moment must be >= 1, got {m}")
    x = as_tensor(x)
    sq = (x * x).sum(dim=-1)
    # clamped so the gradient at the origin is zero rather than NaN
    radius = torch.sqrt(torch.clamp_min(sq, torch.finfo(sq.dtype).tiny))
    return (math.pi - 2.0 * torch.atan(radius)) ** m


def relativistic_cosine(x_r, x_f, clamp: bool = True) -> torch.Tensor:
    """T(x_r) . T(x_f) written directly in the Euclidean coordinates."""
    x_r, x_f = as_tensor(x_r), as_tensor(x_f)
    a = (x_r * x_r).sum(dim=-1)
    b = (x_f * x_f).sum(dim=-1)
    c = (x_r * x_f).sum(dim=-1)
    cosine = (a * b - a - b + 4.0 * c + 1.0) / ((a + 1.0) * (b + 1.0))
    if clamp:
        cosine = torch.clamp(cosine, -1.0 + CLAMP_DELTA, 1.0 - CLAMP_DELTA)
    return cosine


def relativistic_distance(x_r, x_f, m: int = 1) -> torch.Tensor:
    """m-th power of the geodesic angle between T(x_r) and T(x_f)."""
    if m < 1:
        raise ValueError(f"Moment must be >= 1, got {m}")
    return torch.arccos(relativistic_cosine(x_r, x_f)) ** m
