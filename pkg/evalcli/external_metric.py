"""External full-reference quality metric run as a separate process (e.g. a VMAF tool)."""

import logging
import re
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from models import CommandRequest, PlanarFrame
from services.command_executor import CommandExecutor, template_fields
from videopipe.yuv_io import write_yuv


logger = logging.getLogger(__name__)

PLACEHOLDERS = {"reference", "distorted", "width", "height", "bitdepth"}
_NUMBER = re.compile(r"[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?")


class ExternalMetricError(RuntimeError):
    """The metric command failed or printed no number."""


def parse_metric_output(output: str) -> float:
    """Last number printed on stdout."""
    stdout = output.split("\nSTDERR:\n", 1)[0]
    numbers = _NUMBER.findall(stdout)
    if not numbers:
        raise ExternalMetricError(f"No numeric value in metric output: {stdout[:200]!r}")
    return float(numbers[-1])


class ExternalMetric:
    """Writes reference and distorted frames to YUV files and runs a command template on them."""

    def __init__(self, command: str, timeout: int = 3600, executor: Optional[CommandExecutor] = None):
        unknown = template_fields(command) - PLACEHOLDERS
        if unknown:
            raise ValueError(f"Unknown placeholders {sorted(unknown)} in metric command")
        self.command = command
        self.timeout = timeout
        self.executor = executor or CommandExecutor(allowed_placeholders=PLACEHOLDERS)

    @property
    def source(self) -> str:
        return self.command.split()[0] if self.command.split() else self.command

    async def measure(self, reference: Sequence[PlanarFrame], distorted: Sequence[PlanarFrame]) -> float:
        if not reference or len(reference) != len(distorted):
            raise ValueError(f"Metric needs equal non-empty frame lists, got {len(reference)} and {len(distorted)}")
        first = reference[0]
        with tempfile.TemporaryDirectory(prefix="cvegan-metric-") as workdir:
            ref_path = Path(workdir) / "reference.yuv"
            dist_path = Path(workdir) / "distorted.yuv"
            write_yuv(str(ref_path), reference)
            write_yuv(str(dist_path), distorted)
            result = await self.executor.execute_command(CommandRequest(
                template=self.command,
                params={
                    "reference": ref_path,
                    "distorted": dist_path,
                    "width": first.width,
                    "height": first.height,
                    "bitdepth": first.bit_depth,
                },
                timeout=self.timeout,
            ))
        if not result.success:
            raise ExternalMetricError(f"Metric command failed: {result.command}: {result.error}")
        return parse_metric_output(result.output)
