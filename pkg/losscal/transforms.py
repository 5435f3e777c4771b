"""Elementary transforms applied to each single loss before weighting."""

import math
from enum import Enum
from typing import Union

import numpy as np
import torch


EPSILON = 1e-8
_SQRT_FLOOR = 1e-16
_ARCSIN_CEIL = 1.0 - 1e-7


class Transform(str, Enum):
    ARCSIN = "arcsin"
    ARSINH = "arsinh"
    EXPM1 = "expm1"
    IDENTITY = "identity"
    LN = "ln"
    SIN = "sin"
    SQRT = "sqrt"
    SQUARE = "square"
    TANH = "tanh"

    @classmethod
    def parse(cls, transform_id: Union[str, "Transform"]) -> "Transform":
        try:
            return cls(transform_id)
        except ValueError:
            known = ", ".join(t.value for t in cls)
            raise ValueError(f"Unknown transform {transform_id!r}; known: {known}") from None


def apply_numpy(transform_id: Union[str, Transform], values) -> np.ndarray:
    """Apply a transform elementwise to losses clipped into [0, 1]."""
    transform = Transform.parse(transform_id)
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    if transform is Transform.IDENTITY:
        return v
    if transform is Transform.SQUARE:
        return v ** 2
    if transform is Transform.SQRT:
        return np.sqrt(v)
    if transform is Transform.EXPM1:
        return np.expm1(v) / math.expm1(1.0)
    if transform is Transform.LN:
        return np.log(np.clip(v, EPSILON, 1.0))
    if transform is Transform.SIN:
        return np.sin(np.pi * v / 2.0)
    if transform is Transform.ARCSIN:
        return np.arcsin(v)
    if transform is Transform.TANH:
        return np.tanh(v)
    return np.arcsinh(v)


def apply_torch(transform_id: Union[str, Transform], values: torch.Tensor) -> torch.Tensor:
    """Differentiable counterpart of apply_numpy."""
    transform = Transform.parse(transform_id)
    v = torch.clamp(values, 0.0, 1.0)
    if transform is Transform.IDENTITY:
        return v
    if transform is Transform.SQUARE:
        return v ** 2
    if transform is Transform.SQRT:
        return torch.sqrt(torch.clamp(v, min=_SQRT_FLOOR))
    if transform is Transform.EXPM1:
        return torch.expm1(v) / math.expm1(1.0)
    if transform is Transform.LN:
        return torch.log(torch.clamp(v, EPSILON, 1.0))
    if transform is Transform.SIN:
        return torch.sin(math.pi * v / 2.0)
    if transform is Transform.ARCSIN:
        return torch.asin(torch.clamp(v, max=_ARCSIN_CEIL))
    if transform is Transform.TANH:
        return torch.tanh(v)
    return torch.asinh(v)


def transform_apply(transform_id: Union[str, Transform], v: float) -> float:
    """Scalar transform value."""
    return float(apply_numpy(transform_id, v))
