"""Synthetic test sequences: smooth gradients, moving shapes and fine texture."""

import logging
from typing import List

import numpy as np

from models import PlanarFrame
from videopipe.frames import convert_444_to_420


logger = logging.getLogger(__name__)


def synthetic_sequence(width: int, height: int, num_frames: int = 1, seed: int = 0,
                       bit_depth: int = 8, chroma_format: str = "420") -> List[PlanarFrame]:
    """Deterministic frames with gradient backgrounds, drifting shapes and low-level texture."""
    if width < 2 or height < 2 or width % 2 or height % 2:
        raise ValueError(f"Synthetic frames need even dimensions >= 2, got {width}x{height}")
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames}")

    rng = np.random.default_rng(seed)
    peak = (1 << bit_depth) - 1
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yy /= max(height - 1, 1)
    xx /= max(width - 1, 1)

    angles = rng.uniform(0, 2 * np.pi, size=3)
    offsets = rng.uniform(0.2, 0.5, size=3)
    amplitudes = rng.uniform(0.2, 0.4, size=3)
    shapes = [
        {
            "kind": rng.integers(0, 2),
            "cx": rng.uniform(0.2, 0.8),
            "cy": rng.uniform(0.2, 0.8),
            "size": rng.uniform(0.08, 0.2),
            "value": rng.uniform(0.1, 0.9, size=3),
            "vx": rng.uniform(-0.02, 0.02),
            "vy": rng.uniform(-0.02, 0.02),
        }
        for _ in range(int(rng.integers(2, 5)))
    ]
    texture = rng.normal(0.0, 0.02, size=(3, height, width))
    stripes = 0.05 * np.sin(2 * np.pi * (xx * width / 6.0 + yy * height / 9.0))

    frames = []
    for t in range(num_frames):
        planes = np.empty((3, height, width))
        for c in range(3):
            ramp = np.cos(angles[c]) * xx + np.sin(angles[c]) * yy
            planes[c] = offsets[c] + amplitudes[c] * ramp
        planes[0] += stripes
        for shape in shapes:
            cx = shape["cx"] + shape["vx"] * t
            cy = shape["cy"] + shape["vy"] * t
            if shape["kind"] == 0:
                mask = (np.abs(xx - cx) < shape["size"]) & (np.abs(yy - cy) < shape["size"])
            else:
                mask = (xx - cx) ** 2 + (yy - cy) ** 2 < shape["size"] ** 2
            for c in range(3):
                planes[c][mask] = shape["value"][c]
        planes += texture
        samples = np.clip(np.rint(planes * peak), 0, peak).astype(np.int32)
        frame = PlanarFrame(samples[0], samples[1], samples[2], bit_depth, "444")
        frames.append(convert_444_to_420(frame) if chroma_format == "420" else frame)
    return frames
