"""Chroma format conversion, 2x resampling and normalization of planar frames."""

import logging

import numpy as np
from PIL import Image

from models import PlanarFrame


logger = logging.getLogger(__name__)


def convert_420_to_444(frame: PlanarFrame) -> PlanarFrame:
    """Nearest-neighbour chroma replication."""
    if frame.chroma_format != "420":
        raise ValueError(f"Expected a 4:2:0 frame, got {frame.chroma_format}")
    cb = np.repeat(np.repeat(frame.cb, 2, axis=0), 2, axis=1)
    cr = np.repeat(np.repeat(frame.cr, 2, axis=0), 2, axis=1)
    return PlanarFrame(frame.y.copy(), cb, cr, frame.bit_depth, "444")


def _average_2x2(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    quads = plane.reshape(h // 2, 2, w // 2, 2).astype(np.int64)
    return ((quads.sum(axis=(1, 3)) + 2) // 4).astype(np.int32)


def convert_444_to_420(frame: PlanarFrame) -> PlanarFrame:
    """2x2 chroma averaging with round-half-up."""
    if frame.chroma_format != "444":
        raise ValueError(f"Expected a 4:4:4 frame, got {frame.chroma_format}")
    if frame.height % 2 or frame.width % 2:
        raise ValueError(f"4:2:0 needs even dimensions, got {frame.width}x{frame.height}")
    return PlanarFrame(frame.y.copy(), _average_2x2(frame.cb), _average_2x2(frame.cr),
                       frame.bit_depth, "420")


def to_444(frame: PlanarFrame) -> PlanarFrame:
    return convert_420_to_444(frame) if frame.chroma_format == "420" else frame


def to_format(frame: PlanarFrame, chroma_format: str) -> PlanarFrame:
    if frame.chroma_format == chroma_format:
        return frame
    return convert_444_to_420(frame) if chroma_format == "420" else convert_420_to_444(frame)


def lanczos_resize_plane(plane: np.ndarray, width: int, height: int) -> np.ndarray:
    """Lanczos3 resampling of one plane on float samples."""
    image = Image.fromarray(np.ascontiguousarray(plane, dtype=np.float32))
    resized = image.resize((width, height), Image.Resampling.LANCZOS)
    return np.asarray(resized, dtype=np.float64)


def _quantize(plane: np.ndarray, peak: int) -> np.ndarray:
    return np.clip(np.rint(plane), 0, peak).astype(np.int32)


def downsample2x(frame: PlanarFrame) -> PlanarFrame:
    """Halve both dimensions with a Lanczos3 filter, keeping the chroma format."""
    if frame.height % 2 or frame.width % 2:
        raise ValueError(f"2x downsampling needs even dimensions, got {frame.width}x{frame.height}")
    if frame.chroma_format == "420" and (frame.height % 4 or frame.width % 4):
        raise ValueError(
            f"2x downsampling of 4:2:0 needs dimensions divisible by 4, got {frame.width}x{frame.height}"
        )
    planes = []
    for plane in (frame.y, frame.cb, frame.cr):
        h, w = plane.shape
        planes.append(_quantize(lanczos_resize_plane(plane, w // 2, h // 2), frame.peak))
    return PlanarFrame(*planes, bit_depth=frame.bit_depth, chroma_format=frame.chroma_format)


def nn_upsample2x(frame: PlanarFrame) -> PlanarFrame:
    """Exact 2x nearest-neighbour replication of every plane."""
    planes = [np.repeat(np.repeat(p, 2, axis=0), 2, axis=1) for p in (frame.y, frame.cb, frame.cr)]
    return PlanarFrame(*planes, bit_depth=frame.bit_depth, chroma_format=frame.chroma_format)


def frame_to_planes(frame: PlanarFrame) -> np.ndarray:
    """3 x H x W float32 array in [0, 1], chroma at full density."""
    full = to_444(frame)
    stacked = np.stack([full.y, full.cb, full.cr]).astype(np.float32)
    return stacked / np.float32(frame.peak)


def planes_to_frame(planes: np.ndarray, bit_depth: int = 8,
                    chroma_format: str = "420") -> PlanarFrame:
    """Inverse of frame_to_planes: denormalize, round, clip, convert chroma."""
    planes = np.asarray(planes, dtype=np.float64)
    if planes.ndim != 3 or planes.shape[0] != 3:
        raise ValueError(f"Expected 3 x H x W planes, got shape {planes.shape}")
    peak = (1 << bit_depth) - 1
    y, cb, cr = (_quantize(p * peak, peak) for p in planes)
    return to_format(PlanarFrame(y, cb, cr, bit_depth, "444"), chroma_format)