"""Overlapping block segmentation of frames and averaging aggregation."""

import logging
from typing import List, Tuple

import numpy as np

from models import PlanarFrame, TileMap
from videopipe.frames import frame_to_planes, planes_to_frame


logger = logging.getLogger(__name__)

BLOCK_SIZE = 96
OVERLAP = 4


def tile_positions(length: int, block_size: int = BLOCK_SIZE, overlap: int = OVERLAP) -> List[int]:
    """Block offsets along one axis; the last block is clamped to the edge."""
    if length <= block_size:
        return [0]
    stride = block_size - overlap
    if stride < 1:
        raise ValueError(f"Overlap {overlap} must be smaller than block size {block_size}")
    positions = list(range(0, length - block_size, stride))
    positions.append(length - block_size)
    return positions


def segment_blocks(frame: PlanarFrame, block_size: int = BLOCK_SIZE,
                   overlap: int = OVERLAP) -> Tuple[np.ndarray, TileMap]:
    """Cut a frame into N x 3 x block x block normalized 4:4:4 blocks, row-major."""
    planes = frame_to_planes(frame)
    _, height, width = planes.shape
    padded_h, padded_w = max(height, block_size), max(width, block_size)
    if (padded_h, padded_w) != (height, width):
        planes = np.pad(planes, ((0, 0), (0, padded_h - height), (0, padded_w - width)), mode="edge")

    positions = tuple(
        (top, left)
        for top in tile_positions(padded_h, block_size, overlap)
        for left in tile_positions(padded_w, block_size, overlap)
    )
    blocks = np.stack([
        planes[:, top:top + block_size, left:left + block_size] for top, left in positions
    ])
    tilemap = TileMap(
        positions=positions,
        frame_height=height,
        frame_width=width,
        padded_height=padded_h,
        padded_width=padded_w,
        bit_depth=frame.bit_depth,
        chroma_format=frame.chroma_format,
        block_size=block_size,
        overlap=overlap,
    )
    return np.ascontiguousarray(blocks, dtype=np.float32), tilemap


def accumulate_blocks(blocks: np.ndarray, tilemap: TileMap) -> np.ndarray:
    """Per-pixel average of all covering blocks, cropped to the frame: 3 x H x W float64."""
    blocks = np.asarray(blocks)
    size = tilemap.block_size
    expected = (len(tilemap.positions), 3, size, size)
    if blocks.shape != expected:
        raise ValueError(f"Blocks shaped {blocks.shape} do not fit the tile map {expected}")

    total = np.zeros((3, tilemap.padded_height, tilemap.padded_width), dtype=np.float64)
    count = np.zeros((tilemap.padded_height, tilemap.padded_width), dtype=np.float64)
    for block, (top, left) in zip(blocks, tilemap.positions):
        if top + size > tilemap.padded_height or left + size > tilemap.padded_width:
            raise ValueError(f"Block at {(top, left)} exceeds the padded frame")
        total[:, top:top + size, left:left + size] += block
        count[top:top + size, left:left + size] += 1.0
    if np.any(count == 0):
        raise ValueError("Tile map leaves pixels uncovered")
    averaged = total / count
    return averaged[:, :tilemap.frame_height, :tilemap.frame_width]


def aggregate_blocks(blocks: np.ndarray, tilemap: TileMap) -> PlanarFrame:
    """Average overlapping blocks back into a frame in the tile map's format."""
    return planes_to_frame(accumulate_blocks(blocks, tilemap), tilemap.bit_depth, tilemap.chroma_format)
