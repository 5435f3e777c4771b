"""Decoder-side enhancement of coded frames with a trained generator."""

import logging
from typing import List, Sequence

import numpy as np
import torch
import torch.nn as nn

from models import PlanarFrame
from videopipe.frames import nn_upsample2x
from videopipe.tiling import aggregate_blocks, segment_blocks


logger = logging.getLogger(__name__)


def enhance_frame(frame: PlanarFrame, generator: nn.Module, batch_size: int = 16,
                  device: str = "cpu") -> PlanarFrame:
    """Segment into blocks, run the generator, aggregate back."""
    block_size = getattr(getattr(generator, "cfg", None), "block_size", 96)
    blocks, tilemap = segment_blocks(frame, block_size)
    outputs = []
    with torch.no_grad():
        for start in range(0, len(blocks), batch_size):
            batch = torch.from_numpy(blocks[start:start + batch_size]).to(device)
            outputs.append(generator(batch).clamp(0.0, 1.0).cpu().numpy())
    return aggregate_blocks(np.concatenate(outputs), tilemap)


def pp_enhance(frames: Sequence[PlanarFrame], generator: nn.Module, batch_size: int = 16,
               device: str = "cpu") -> List[PlanarFrame]:
    """Post-process fully decoded frames."""
    generator.eval()
    generator.to(device)
    return [enhance_frame(f, generator, batch_size, device) for f in frames]


def sra_restore(frames: Sequence[PlanarFrame], generator: nn.Module, batch_size: int = 16,
                device: str = "cpu") -> List[PlanarFrame]:
    """NN-upsample decoded low-resolution frames 2x, then post-process."""
    return pp_enhance([nn_upsample2x(f) for f in frames], generator, batch_size, device)
