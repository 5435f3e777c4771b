"""Loading source sequences from raw files or the synthetic generator."""

import logging
from typing import List, Optional

from models import PlanarFrame, SequenceSpec
from videopipe.synthetic import synthetic_sequence
from videopipe.yuv_io import read_y4m, read_yuv


logger = logging.getLogger(__name__)

DEFAULT_SYNTHETIC_FRAMES = 2


def load_sequence(spec: SequenceSpec, num_frames: Optional[int] = None) -> List[PlanarFrame]:
    """Frames of a sequence, capped at num_frames (or the sequence's own frame count)."""
    limit = num_frames if num_frames is not None else spec.num_frames
    if spec.path is None:
        frames = synthetic_sequence(spec.width, spec.height, limit or DEFAULT_SYNTHETIC_FRAMES,
                                    seed=int(spec.synthetic_seed or 0), bit_depth=spec.bit_depth)
    elif spec.file_format == "y4m":
        frames, _ = read_y4m(spec.path, limit)
    else:
        frames = read_yuv(spec.path, spec.width, spec.height, spec.bit_depth, "420", limit)
    if not frames:
        raise ValueError(f"Sequence {spec.name!r} has no frames")
    logger.debug(f"Loaded {len(frames)} frames of {spec.name}")
    return frames
