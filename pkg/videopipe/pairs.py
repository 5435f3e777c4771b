"""Training-pair generation for the post-processing and resolution-adaptation workflows."""

import logging
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import torch

from models import DEFAULT_QPS, TOOLS, CodecAdapter, PlanarFrame
from trainer.dataset import PairDataset
from videopipe.codec import CodecRunner
from videopipe.frames import downsample2x, frame_to_planes, nn_upsample2x


logger = logging.getLogger(__name__)

BLOCK_SIZE = 96


def _runner(codec: Union[CodecAdapter, object]):
    if isinstance(codec, CodecAdapter):
        return CodecRunner(codec)
    if not hasattr(codec, "encode_decode"):
        raise TypeError("codec must be a CodecAdapter or provide encode_decode(frames, qp)")
    return codec


def degrade(frames: Sequence[PlanarFrame], codec, qp: int, tool: str) -> Tuple[List[PlanarFrame], int]:
    """Code frames as the workflow does before enhancement.

    PP codes at full resolution; SRA downsamples 2x, codes, then NN-upsamples.
    """
    if tool == "PP":
        return codec.encode_decode(list(frames), qp)
    low = [downsample2x(f) for f in frames]
    decoded, size = codec.encode_decode(low, qp)
    return [nn_upsample2x(f) for f in decoded], size


def build_training_pairs(sources: Sequence[Sequence[PlanarFrame]], codec,
                         qps: Sequence[int] = DEFAULT_QPS, tool: str = "PP",
                         pairs_per_qp: int = 64, seed: int = 0,
                         block_size: int = BLOCK_SIZE) -> Dict[int, PairDataset]:
    """Random aligned crops of source and degraded frames, one PairDataset per QP."""
    if tool not in TOOLS:
        raise ValueError(f"tool must be one of {TOOLS}, got {tool!r}")
    if not sources or any(len(frames) == 0 for frames in sources):
        raise ValueError("build_training_pairs needs at least one non-empty source")
    for frames in sources:
        for frame in frames:
            if frame.width < block_size or frame.height < block_size:
                raise ValueError(f"Source frame {frame.width}x{frame.height} smaller than {block_size} blocks")

    runner = _runner(codec)
    targets = [[frame_to_planes(f) for f in frames] for frames in sources]
    datasets = {}
    for qp in qps:
        degraded_planes = []
        for frames in sources:
            decoded, _ = degrade(frames, runner, qp, tool)
            degraded_planes.append([frame_to_planes(f) for f in decoded])

        rng = np.random.default_rng([seed, qp])
        inputs, outputs, positions = [], [], []
        for _ in range(pairs_per_qp):
            src = int(rng.integers(len(sources)))
            idx = int(rng.integers(len(sources[src])))
            height, width = targets[src][idx].shape[1:]
            top = int(rng.integers(0, height - block_size + 1))
            left = int(rng.integers(0, width - block_size + 1))
            window = (slice(None), slice(top, top + block_size), slice(left, left + block_size))
            inputs.append(degraded_planes[src][idx][window])
            outputs.append(targets[src][idx][window])
            positions.append((src, idx, top, left))

        datasets[qp] = PairDataset(
            torch.from_numpy(np.stack(inputs)), torch.from_numpy(np.stack(outputs)), qp, tool, positions
        )
        logger.info(f"Built {pairs_per_qp} {tool} pairs at QP {qp}")
    return datasets
