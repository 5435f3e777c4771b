"""Codec adapter: built-in DCT quantization stub or external encoder/decoder commands."""

import asyncio
import logging
import math
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.fft import dctn, idctn

from models import CodecAdapter, CommandRequest, PlanarFrame
from services.command_executor import CommandExecutor
from videopipe.yuv_io import read_yuv, write_yuv


logger = logging.getLogger(__name__)

TRANSFORM_SIZE = 8
PLACEHOLDERS = {"input", "output", "qp", "width", "height", "fps", "bitdepth"}


class CodecError(RuntimeError):
    """External codec failure, carrying the captured command output."""

    def __init__(self, message: str, output: str = ""):
        super().__init__(message)
        self.output = output


def quant_step(qp: int, bit_depth: int = 8) -> float:
    """Uniform quantizer step 2^((QP - 4) / 6), scaled for bit depths above 8."""
    return 2.0 ** ((qp - 4) / 6.0) * 2.0 ** (bit_depth - 8)


def exp_golomb_bits(levels: np.ndarray) -> int:
    """Total signed Exp-Golomb code length of integer levels."""
    levels = np.asarray(levels, dtype=np.int64).ravel()
    mapped = np.where(levels > 0, 2 * levels - 1, -2 * levels)
    _, exponent = np.frexp((mapped + 1).astype(np.float64))
    return int(np.sum(2 * (exponent - 1) + 1))


def stub_code_plane(plane: np.ndarray, qp: int, bit_depth: int) -> Tuple[np.ndarray, int]:
    """Blockwise 8x8 DCT, uniform quantization and reconstruction of one plane."""
    plane = np.asarray(plane, dtype=np.float64)
    height, width = plane.shape
    n = TRANSFORM_SIZE
    pad_h, pad_w = (-height) % n, (-width) % n
    padded = np.pad(plane, ((0, pad_h), (0, pad_w)), mode="edge")
    rows, cols = padded.shape[0] // n, padded.shape[1] // n
    tiles = padded.reshape(rows, n, cols, n).transpose(0, 2, 1, 3)

    step = quant_step(qp, bit_depth)
    levels = np.rint(dctn(tiles, axes=(-2, -1), norm="ortho") / step)
    restored = idctn(levels * step, axes=(-2, -1), norm="ortho")
    restored = restored.transpose(0, 2, 1, 3).reshape(padded.shape)[:height, :width]

    peak = (1 << bit_depth) - 1
    decoded = np.clip(np.rint(restored), 0, peak).astype(np.int32)
    return decoded, exp_golomb_bits(levels)


def stub_encode_decode(frames: Sequence[PlanarFrame], qp: int,
                       header_bytes: int = 16) -> Tuple[List[PlanarFrame], int]:
    """Code frames with the DCT stub; size is header plus entropy-proxy bytes per frame."""
    decoded, total_bytes = [], 0
    for frame in frames:
        planes, bits = [], 0
        for plane in (frame.y, frame.cb, frame.cr):
            coded, plane_bits = stub_code_plane(plane, qp, frame.bit_depth)
            planes.append(coded)
            bits += plane_bits
        decoded.append(PlanarFrame(*planes, bit_depth=frame.bit_depth, chroma_format=frame.chroma_format))
        total_bytes += header_bytes + math.ceil(bits / 8)
    return decoded, total_bytes


class CodecRunner:
    """Encodes and decodes frame sequences with the configured adapter."""

    def __init__(self, adapter: CodecAdapter, executor: Optional[CommandExecutor] = None):
        self.adapter = adapter
        self.executor = executor or CommandExecutor(allowed_placeholders=PLACEHOLDERS)

    async def run(self, frames: Sequence[PlanarFrame], qp: int) -> Tuple[List[PlanarFrame], int]:
        if not frames:
            raise ValueError("No frames to code")
        if self.adapter.mode == "builtin-stub":
            return await asyncio.to_thread(stub_encode_decode, frames, qp, self.adapter.header_bytes)
        return await self._run_external(frames, qp)

    def encode_decode(self, frames: Sequence[PlanarFrame], qp: int) -> Tuple[List[PlanarFrame], int]:
        """Synchronous wrapper around run()."""
        if self.adapter.mode == "builtin-stub":
            if not frames:
                raise ValueError("No frames to code")
            return stub_encode_decode(frames, qp, self.adapter.header_bytes)
        return asyncio.run(self._run_external(frames, qp))

    async def _execute(self, template: str, params: Dict[str, Any]) -> None:
        result = await self.executor.execute_command(
            CommandRequest(template=template, params=params, timeout=self.adapter.timeout)
        )
        if not result.success:
            raise CodecError(f"Codec command failed: {result.command}: {result.error}", result.output)

    async def _run_external(self, frames: Sequence[PlanarFrame], qp: int) -> Tuple[List[PlanarFrame], int]:
        first = frames[0]
        with tempfile.TemporaryDirectory(prefix="cvegan-codec-") as workdir:
            source = Path(workdir) / "source.yuv"
            bitstream = Path(workdir) / "stream.bin"
            reconstructed = Path(workdir) / "decoded.yuv"
            write_yuv(str(source), frames)

            common = {
                "qp": qp,
                "width": first.width,
                "height": first.height,
                "fps": self.adapter.fps,
                "bitdepth": first.bit_depth,
            }
            await self._execute(self.adapter.encode_command, {**common, "input": source, "output": bitstream})
            if not bitstream.is_file():
                raise CodecError(f"Encoder produced no bitstream at {bitstream}")
            size = bitstream.stat().st_size
            await self._execute(self.adapter.decode_command, {**common, "input": bitstream, "output": reconstructed})
            if not reconstructed.is_file():
                raise CodecError(f"Decoder produced no output at {reconstructed}")
            try:
                decoded = read_yuv(str(reconstructed), first.width, first.height, first.bit_depth,
                                   first.chroma_format, num_frames=len(frames))
            except ValueError as e:
                raise CodecError(f"Decoded output unreadable: {e}") from e

        if size <= 0:
            raise CodecError("Encoder produced an empty bitstream")
        logger.debug(f"External codec QP {qp}: {len(frames)} frames, {size} bytes")
        return decoded, size


def codec_run(frames: Sequence[PlanarFrame], adapter: CodecAdapter, qp: int) -> Tuple[List[PlanarFrame], int]:
    """Code frames at one QP, returning decoded frames and bitstream bytes."""
    return CodecRunner(adapter).encode_decode(frames, qp)
