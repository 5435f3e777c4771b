"""Aligned degraded/target block pairs and their on-disk manifest."""

import csv
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import torch
from torch.utils.data import Dataset

from models import TOOLS


logger = logging.getLogger(__name__)

MANIFEST_HEADER = ["path", "qp", "tool", "num_pairs"]


class PairDataset(Dataset):
    """Degraded inputs and target blocks (N x 3 x 96 x 96 in [0, 1]) of one QP sub-group."""

    def __init__(self, degraded: torch.Tensor, target: torch.Tensor, qp: int, tool: str = "PP",
                 positions: Optional[Sequence[Tuple[int, int, int, int]]] = None):
        degraded = torch.as_tensor(degraded, dtype=torch.float32)
        target = torch.as_tensor(target, dtype=torch.float32)
        if degraded.shape != target.shape:
            raise ValueError(f"Degraded {tuple(degraded.shape)} and target {tuple(target.shape)} differ")
        if degraded.dim() != 4 or degraded.shape[1] != 3:
            raise ValueError(f"Pairs must be N x 3 x H x W, got {tuple(degraded.shape)}")
        for name, tensor in (("degraded", degraded), ("target", target)):
            if tensor.numel() and (not torch.isfinite(tensor).all() or tensor.min() < 0 or tensor.max() > 1):
                raise ValueError(f"{name} blocks must be finite and within [0, 1]")
        if tool not in TOOLS:
            raise ValueError(f"tool must be one of {TOOLS}, got {tool!r}")
        self.degraded = degraded
        self.target = target
        self.qp = int(qp)
        self.tool = tool
        self.positions = [tuple(int(v) for v in p) for p in (positions or [])]

    def __len__(self) -> int:
        return int(self.degraded.shape[0])

    def __getitem__(self, index: int) -> Tuple[torch.Tensor, torch.Tensor]:
        return self.degraded[index], self.target[index]

    def save(self, path: str) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        torch.save({
            "degraded": self.degraded,
            "target": self.target,
            "qp": self.qp,
            "tool": self.tool,
            "positions": [list(p) for p in self.positions],
        }, target)
        return target

    @classmethod
    def load(cls, path: str) -> "PairDataset":
        try:
            payload = torch.load(path, map_location="cpu", weights_only=True)
            return cls(payload["degraded"], payload["target"], payload["qp"], payload["tool"],
                       payload.get("positions"))
        except (OSError, KeyError, RuntimeError) as e:
            raise ValueError(f"Cannot load pair dataset {path}: {e}") from e


def save_datasets(datasets: Sequence[PairDataset], out_dir: str) -> Path:
    """One .pt file per QP sub-group plus manifest.csv."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    manifest = root / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for dataset in datasets:
            name = f"pairs_{dataset.tool}_qp{dataset.qp}.pt"
            dataset.save(str(root / name))
            writer.writerow([name, dataset.qp, dataset.tool, len(dataset)])
    logger.info(f"Wrote {len(datasets)} pair datasets to {root}")
    return manifest


def load_manifest(manifest: str, qp: Optional[int] = None, tool: Optional[str] = None) -> List[PairDataset]:
    """Load the datasets listed in a manifest, optionally filtered by QP and tool."""
    root = Path(manifest).parent
    datasets = []
    with open(manifest, "r", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if qp is not None and int(row["qp"]) != qp:
                continue
            if tool is not None and row["tool"] != tool:
                continue
            dataset = PairDataset.load(str(root / row["path"]))
            if len(dataset) != int(row["num_pairs"]):
                raise ValueError(f"{row['path']}: manifest lists {row['num_pairs']} pairs, file has {len(dataset)}")
            datasets.append(dataset)
    return datasets
