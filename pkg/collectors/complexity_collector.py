"""Model complexity collector: parameter counts, forward timings and process memory."""

import logging
import time
from typing import Any, Dict, Optional

import psutil
import torch
import torch.nn as nn

from nnarch.generator import count_parameters


logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 96


def sample_batch(batch_size: int, block_size: int = DEFAULT_BLOCK_SIZE, seed: int = 0) -> torch.Tensor:
    """Fixed random input batch shared by every timed model."""
    generator = torch.Generator().manual_seed(seed)
    return torch.rand(batch_size, 3, block_size, block_size, generator=generator)


class ModelComplexityCollector:
    """Collects size and speed figures of a model with psutil and torch."""

    def __init__(self, repeats: int = 3, warmup: int = 1, device: str = "cpu"):
        if repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {repeats}")
        self.repeats = repeats
        self.warmup = warmup
        self.device = torch.device(device)
        self.process = psutil.Process()

    def rss_mb(self) -> float:
        return self.process.memory_info().rss / (1024 ** 2)

    def collect(self, model: nn.Module, batch: torch.Tensor) -> Optional[Dict[str, Any]]:
        """Median forward time in ms over the repeats, plus parameter count and RSS."""
        try:
            model = model.to(self.device).eval()
            batch = batch.to(self.device)
            timings = []
            with torch.no_grad():
                for _ in range(self.warmup):
                    model(batch)
                for _ in range(self.repeats):
                    start = time.perf_counter()
                    model(batch)
                    timings.append((time.perf_counter() - start) * 1000.0)
            timings.sort()
            metrics = {
                "parameters": count_parameters(model),
                "runtime_ms": timings[len(timings) // 2],
                "rss_mb": self.rss_mb(),
            }
            logger.debug(f"Collected complexity: {metrics}")
            return metrics
        except Exception as e:
            logger.error(f"Failed to collect model complexity: {e}")
            return None
