"""Relative complexity ledger of enhancement models."""

import logging
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import torch.nn as nn

from collectors.complexity_collector import DEFAULT_BLOCK_SIZE, ModelComplexityCollector, sample_batch
from models import ComplexityRow
from nnarch.checkpoint import load_generator


logger = logging.getLogger(__name__)

NamedModels = Union[Mapping[str, nn.Module], Sequence[Tuple[str, nn.Module]]]


def load_models(paths: Sequence[str]) -> List[Tuple[str, nn.Module]]:
    """Generators from checkpoint files, named after the file stem."""
    return [(Path(p).stem, load_generator(p)) for p in paths]


def complexity_ledger(models: NamedModels, baseline: Optional[str] = None, batch_size: int = 2,
                      repeats: int = 3, seed: int = 0,
                      collector: Optional[ModelComplexityCollector] = None) -> List[ComplexityRow]:
    """Parameter counts and forward times, normalized to the baseline (first model by default)."""
    items = list(models.items()) if isinstance(models, Mapping) else list(models)
    if not items:
        return []
    names = [name for name, _ in items]
    baseline = baseline or names[0]
    if baseline not in names:
        raise ValueError(f"Baseline {baseline!r} is not among the models {names}")

    collector = collector or ModelComplexityCollector(repeats=repeats)
    measured = {}
    for name, model in items:
        block_size = getattr(getattr(model, "cfg", None), "block_size", DEFAULT_BLOCK_SIZE)
        metrics = collector.collect(model, sample_batch(batch_size, block_size, seed))
        if metrics is None:
            raise RuntimeError(f"Could not measure model {name!r}")
        measured[name] = metrics

    base = measured[baseline]
    rows = []
    for name in names:
        m = measured[name]
        runtime_ratio = m["runtime_ms"] / base["runtime_ms"] if base["runtime_ms"] > 0 else float("nan")
        rows.append(ComplexityRow(
            name=name,
            parameters=int(m["parameters"]),
            parameter_ratio=m["parameters"] / base["parameters"] if base["parameters"] else float("nan"),
            runtime_ms=float(m["runtime_ms"]),
            runtime_ratio=1.0 if name == baseline else runtime_ratio,
            rss_mb=float(m["rss_mb"]),
        ))
        logger.info(f"{name}: {m['parameters']} parameters, {m['runtime_ms']:.2f} ms per sample batch")
    return rows
