"""Closed-form gradients of the geodesic moments checked against autograd and finite differences."""

import logging
import math
from typing import Callable, List, Sequence, Tuple

import numpy as np
import torch

from models import GradCheckReport
from spheregan.geometry import north_pole_distance, relativistic_cosine, relativistic_distance


logger = logging.getLogger(__name__)

DEGENERATE_MARGIN = 1e-3
DEFAULT_DELTA = 1e-6
DEFAULT_TOLERANCE = 1e-4
_TINY = 1e-300

FUNCTIONS = ("north_pole", "relativistic")


def north_pole_grad(x: np.ndarray, m: int) -> np.ndarray:
    """d/dx of (pi - 2 arctan |x|)^m."""
    x = np.asarray(x, dtype=np.float64)
    radius = np.linalg.norm(x)
    theta = math.pi - 2.0 * math.atan(radius)
    return m * theta ** (m - 1) * (-2.0 * x / (radius * (1.0 + radius ** 2)))


def relativistic_grad(x_r: np.ndarray, x_f: np.ndarray, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients of arccos(A)^m with respect to x_r and x_f."""
    x_r = np.asarray(x_r, dtype=np.float64)
    x_f = np.asarray(x_f, dtype=np.float64)
    a, b, c = x_r @ x_r, x_f @ x_f, x_r @ x_f
    numerator = a * b - a - b + 4.0 * c + 1.0
    denominator = (a + 1.0) * (b + 1.0)
    cosine = numerator / denominator
    outer = m * math.acos(cosine) ** (m - 1) * (-1.0 / math.sqrt(1.0 - cosine ** 2))

    d_num_r = 2.0 * x_r * (b - 1.0) + 4.0 * x_f
    d_den_r = 2.0 * x_r * (b + 1.0)
    d_num_f = 2.0 * x_f * (a - 1.0) + 4.0 * x_r
    d_den_f = 2.0 * x_f * (a + 1.0)
    grad_r = (d_num_r * denominator - numerator * d_den_r) / denominator ** 2
    grad_f = (d_num_f * denominator - numerator * d_den_f) / denominator ** 2
    return outer * grad_r, outer * grad_f


def _point_cosine(function: str, point: Sequence[np.ndarray]) -> float:
    if function == "north_pole":
        sq = float(point[0] @ point[0])
        return (sq - 1.0) / (sq + 1.0)
    return float(relativistic_cosine(torch.as_tensor(point[0]), torch.as_tensor(point[1]), clamp=False))


def is_degenerate(function: str, point: Sequence[np.ndarray], margin: float = DEGENERATE_MARGIN) -> bool:
    """True when the angle cosine is within margin of +-1."""
    return abs(_point_cosine(function, point)) > 1.0 - margin


def _scalar_fn(function: str, m: int) -> Callable[[np.ndarray], float]:
    if function == "north_pole":
        return lambda flat: float(north_pole_distance(torch.as_tensor(flat), m))

    def relativistic(flat: np.ndarray) -> float:
        half = flat.size // 2
        return float(relativistic_distance(torch.as_tensor(flat[:half]), torch.as_tensor(flat[half:]), m))

    return relativistic


def central_differences(fn: Callable[[np.ndarray], float], flat: np.ndarray,
                        delta: float = DEFAULT_DELTA) -> np.ndarray:
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        step = np.zeros_like(flat)
        step[i] = delta
        grad[i] = (fn(flat + step) - fn(flat - step)) / (2.0 * delta)
    return grad


def _autograd(function: str, point: Sequence[np.ndarray], m: int) -> np.ndarray:
    tensors = [torch.tensor(p, dtype=torch.float64, requires_grad=True) for p in point]
    if function == "north_pole":
        value = north_pole_distance(tensors[0], m)
    else:
        value = relativistic_distance(tensors[0], tensors[1], m)
    grads = torch.autograd.grad(value, tensors)
    return np.concatenate([g.detach().numpy() for g in grads])


def _relative_error(g: np.ndarray, reference: np.ndarray) -> float:
    scale = max(np.linalg.norm(g), np.linalg.norm(reference), _TINY)
    return float(np.linalg.norm(g - reference) / scale)


def gradcheck(function: str, point: Sequence[np.ndarray], m: int = 1,
              delta: float = DEFAULT_DELTA, tolerance: float = DEFAULT_TOLERANCE) -> GradCheckReport:
    """Compare closed-form, autograd and central-difference gradients at one point."""
    if function not in FUNCTIONS:
        raise ValueError(f"Unknown gradcheck function {function!r}; expected one of {FUNCTIONS}")
    arity = 1 if function == "north_pole" else 2
    point = [np.asarray(p, dtype=np.float64) for p in point]
    if len(point) != arity:
        raise ValueError(f"{function} gradcheck takes {arity} point(s), got {len(point)}")
    if is_degenerate(function, point):
        raise ValueError(f"Degenerate {function} point: |A| > {1.0 - DEGENERATE_MARGIN}")

    if function == "north_pole":
        analytic = north_pole_grad(point[0], m)
    else:
        analytic = np.concatenate(relativistic_grad(point[0], point[1], m))
    flat = np.concatenate(point)
    numeric = central_differences(_scalar_fn(function, m), flat, delta)
    automatic = _autograd(function, point, m)

    return GradCheckReport(
        function=function,
        moment=m,
        max_rel_error=_relative_error(analytic, numeric),
        autograd_rel_error=_relative_error(analytic, automatic),
        max_abs_grad=float(np.max(np.abs(analytic))),
        finite=bool(np.all(np.isfinite(analytic)) and np.all(np.isfinite(numeric))),
        tolerance=tolerance,
    )


def fuzz_points(function: str, count: int, dim: int = 8, seed: int = 0) -> List[List[np.ndarray]]:
    """Random non-degenerate points, resampling any that fall near a pole."""
    rng = np.random.default_rng(seed)
    arity = 1 if function == "north_pole" else 2
    points: List[List[np.ndarray]] = []
    while len(points) < count:
        candidate = [rng.standard_normal(dim) for _ in range(arity)]
        if not is_degenerate(function, candidate):
            points.append(candidate)
    return points


def run_suite(count: int = 100, dim: int = 8, moments: Sequence[int] = (1, 2, 3),
              seed: int = 0, delta: float = DEFAULT_DELTA,
              tolerance: float = DEFAULT_TOLERANCE) -> List[GradCheckReport]:
    """Gradient checks for both distances at every moment over fuzzed points."""
    reports = []
    for function in FUNCTIONS:
        points = fuzz_points(function, count, dim, seed)
        for m in moments:
            for point in points:
                reports.append(gradcheck(function, point, m, delta, tolerance))
    failed = [r for r in reports if not r.passed]
    if failed:
        logger.error(f"❌ {len(failed)}/{len(reports)} gradient checks failed")
    else:
        logger.info(f"✅ {len(reports)} gradient checks passed")
    return reports
