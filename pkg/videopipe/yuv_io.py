"""Raw planar YUV and Y4M readers/writers, PNG block dumps."""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from models import PlanarFrame


logger = logging.getLogger(__name__)

Y4M_MAGIC = b"YUV4MPEG2"
Y4M_CHROMA = {"420": "C420jpeg", "444": "C444"}


def _sample_dtype(bit_depth: int) -> np.dtype:
    return np.dtype(np.uint8) if bit_depth == 8 else np.dtype("<u2")


def plane_shapes(width: int, height: int, chroma_format: str) -> List[Tuple[int, int]]:
    chroma = PlanarFrame.chroma_shape(height, width, chroma_format)
    return [(height, width), chroma, chroma]


def frame_samples(width: int, height: int, chroma_format: str) -> int:
    return sum(h * w for h, w in plane_shapes(width, height, chroma_format))


def frame_size_bytes(width: int, height: int, bit_depth: int = 8, chroma_format: str = "420") -> int:
    return frame_samples(width, height, chroma_format) * _sample_dtype(bit_depth).itemsize


def _frame_from_buffer(buffer: bytes, width: int, height: int, bit_depth: int,
                       chroma_format: str) -> PlanarFrame:
    samples = np.frombuffer(buffer, dtype=_sample_dtype(bit_depth)).astype(np.int32)
    planes, offset = [], 0
    for h, w in plane_shapes(width, height, chroma_format):
        planes.append(samples[offset:offset + h * w].reshape(h, w))
        offset += h * w
    return PlanarFrame(*planes, bit_depth=bit_depth, chroma_format=chroma_format)


def _frame_to_bytes(frame: PlanarFrame) -> bytes:
    dtype = _sample_dtype(frame.bit_depth)
    return b"".join(p.astype(dtype).tobytes() for p in (frame.y, frame.cb, frame.cr))


def read_yuv(path: str, width: int, height: int, bit_depth: int = 8,
             chroma_format: str = "420", num_frames: Optional[int] = None,
             start: int = 0) -> List[PlanarFrame]:
    """Read planar YUV frames (8-bit, or 10-bit little-endian in 16-bit words)."""
    size = frame_size_bytes(width, height, bit_depth, chroma_format)
    frames = []
    with open(path, "rb") as fh:
        fh.seek(start * size)
        while num_frames is None or len(frames) < num_frames:
            buffer = fh.read(size)
            if not buffer:
                break
            if len(buffer) < size:
                raise ValueError(f"{path}: truncated frame {start + len(frames)} ({len(buffer)}/{size} bytes)")
            frames.append(_frame_from_buffer(buffer, width, height, bit_depth, chroma_format))
    if num_frames is not None and len(frames) < num_frames:
        raise ValueError(f"{path}: expected {num_frames} frames, found {len(frames)}")
    logger.debug(f"Read {len(frames)} frames from {path}")
    return frames


def write_yuv(path: str, frames: Sequence[PlanarFrame], append: bool = False) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "ab" if append else "wb") as fh:
        for frame in frames:
            fh.write(_frame_to_bytes(frame))
    return target


def _parse_y4m_header(line: bytes) -> Tuple[int, int, float, str]:
    tokens = line.split()
    if not tokens or tokens[0] != Y4M_MAGIC:
        raise ValueError("Not a Y4M stream")
    width = height = 0
    fps = 30.0
    chroma_format = "420"
    for token in tokens[1:]:
        key, value = chr(token[0]), token[1:].decode("ascii")
        if key == "W":
            width = int(value)
        elif key == "H":
            height = int(value)
        elif key == "F":
            num, den = value.split(":")
            fps = int(num) / int(den)
        elif key == "C":
            if value in ("420", "420jpeg", "420mpeg2", "420paldv"):
                chroma_format = "420"
            elif value == "444":
                chroma_format = "444"
            else:
                raise ValueError(f"Unsupported Y4M colour space C{value}; only 8-bit 420/444")
    if width <= 0 or height <= 0:
        raise ValueError("Y4M header lacks W/H")
    return width, height, fps, chroma_format


def read_y4m(path: str, num_frames: Optional[int] = None) -> Tuple[List[PlanarFrame], float]:
    """Read an 8-bit Y4M file, returning the frames and the frame rate."""
    frames: List[PlanarFrame] = []
    with open(path, "rb") as fh:
        width, height, fps, chroma_format = _parse_y4m_header(fh.readline())
        size = frame_size_bytes(width, height, 8, chroma_format)
        while num_frames is None or len(frames) < num_frames:
            marker = fh.readline()
            if not marker:
                break
            if not marker.startswith(b"FRAME"):
                raise ValueError(f"{path}: bad frame marker {marker[:16]!r}")
            buffer = fh.read(size)
            if len(buffer) < size:
                raise ValueError(f"{path}: truncated frame {len(frames)}")
            frames.append(_frame_from_buffer(buffer, width, height, 8, chroma_format))
    return frames, fps


def write_y4m(path: str, frames: Sequence[PlanarFrame], fps: float = 30.0) -> Path:
    if not frames:
        raise ValueError("No frames to write")
    first = frames[0]
    if first.bit_depth != 8:
        raise ValueError("Y4M output supports 8-bit frames only")
    rate = f"{int(round(fps * 1000))}:1000"
    header = f"YUV4MPEG2 W{first.width} H{first.height} F{rate} Ip A1:1 {Y4M_CHROMA[first.chroma_format]}\n"
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as fh:
        fh.write(header.encode("ascii"))
        for frame in frames:
            if frame.geometry != first.geometry:
                raise ValueError("All Y4M frames must share one geometry")
            fh.write(b"FRAME\n")
            fh.write(_frame_to_bytes(frame))
    return target


def save_block_png(block: np.ndarray, path: str) -> Path:
    """Save one 3 x H x W YCbCr block in [0, 1] as an RGB PNG."""
    block = np.asarray(block)
    if block.ndim != 3 or block.shape[0] != 3:
        raise ValueError(f"Expected a 3 x H x W block, got {block.shape}")
    samples = np.clip(np.rint(block * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(samples), mode="YCbCr").convert("RGB").save(target)
    return target
