"""Loss history of a training run and its CSV form (`epoch,step,loss_name,value`)."""

import csv
from pathlib import Path
from typing import Dict, List

import numpy as np

from models import LossRecord


HISTORY_HEADER = ["epoch", "step", "loss_name", "value"]
EPOCH_MEAN_PREFIX = "epoch_mean_"


class LossHistory:
    def __init__(self):
        self.records: List[LossRecord] = []

    def add(self, epoch: int, step: int, loss_name: str, value: float) -> None:
        self.records.append(LossRecord(int(epoch), int(step), loss_name, float(value)))

    def values(self, loss_name: str) -> List[float]:
        return [r.value for r in self.records if r.loss_name == loss_name]

    def names(self) -> List[str]:
        return sorted({r.loss_name for r in self.records})

    def close_epoch(self, epoch: int, step: int, loss_names: List[str]) -> Dict[str, float]:
        """Record and return the mean of each named loss over one epoch."""
        means = {}
        for name in loss_names:
            values = [r.value for r in self.records if r.epoch == epoch and r.loss_name == name]
            if values:
                means[name] = float(np.mean(values))
                self.add(epoch, step, EPOCH_MEAN_PREFIX + name, means[name])
        return means

    def epoch_means(self, loss_name: str) -> List[float]:
        return self.values(EPOCH_MEAN_PREFIX + loss_name)

    def to_csv(self, path: str) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(HISTORY_HEADER)
            for r in self.records:
                writer.writerow([r.epoch, r.step, r.loss_name, repr(r.value)])
        return target

    @classmethod
    def from_csv(cls, path: str) -> "LossHistory":
        history = cls()
        with open(path, "r", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                history.add(int(row["epoch"]), int(row["step"]), row["loss_name"], float(row["value"]))
        return history

    def __len__(self) -> int:
        return len(self.records)
