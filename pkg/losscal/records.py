"""Calibration data files and loss measurement on video sequences."""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import torch

from metrics.features import FeatureExtractor
from metrics.quality import measure_loss_vector
from models import LOSS_NAMES, CalibrationResult, LossVector, PlanarFrame, QualityRecord, SequenceSpec
from videopipe.sources import load_sequence
from videopipe.tiling import segment_blocks


logger = logging.getLogger(__name__)

RECORD_HEADER = ["sequence_id", *LOSS_NAMES, "score"]
VIDEO_HEADER = ["sequence_id", "reference", "distorted", "width", "height", "score"]


def read_records_csv(path: str) -> List[QualityRecord]:
    """Read `sequence_id,l1,l2,grad,feat,ssim_loss,msssim_loss,score` rows."""
    records = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(RECORD_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                losses = LossVector.from_sequence([float(row[name]) for name in LOSS_NAMES])
                records.append(QualityRecord(row["sequence_id"], losses, float(row["score"])))
            except ValueError as e:
                raise ValueError(f"{path}:{line_no}: {e}") from e
    return records


def write_records_csv(path: str, records: Sequence[QualityRecord]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_HEADER)
        writer.writeheader()
        for record in records:
            writer.writerow(record.to_dict())


def _listing_sequence(root: Path, sequence_id: str, path: str, row: Mapping[str, str]) -> SequenceSpec:
    location = Path(path) if Path(path).is_absolute() else root / path
    num_frames = row.get("num_frames") or None
    return SequenceSpec(
        name=sequence_id,
        width=int(row["width"]),
        height=int(row["height"]),
        path=str(location),
        bit_depth=int(row.get("bit_depth") or 8),
        num_frames=int(num_frames) if num_frames else None,
        file_format="y4m" if location.suffix.lower() == ".y4m" else "yuv",
    )


def read_video_listing(path: str, extractor: Optional[FeatureExtractor] = None,
                       feature_normalizer: float = 1.0) -> List[QualityRecord]:
    """Measure loss vectors for `sequence_id,reference,distorted,width,height,score` rows.

    Relative video paths resolve against the listing's directory; `bit_depth`
    and `num_frames` columns are optional.
    """
    root = Path(path).parent
    records = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(VIDEO_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                name = row["sequence_id"]
                reference = load_sequence(_listing_sequence(root, name, row["reference"], row))
                distorted = load_sequence(_listing_sequence(root, name, row["distorted"], row))
                losses = sequence_loss_vector(reference, distorted, extractor, feature_normalizer)
                records.append(QualityRecord(name, losses, float(row["score"])))
            except (OSError, ValueError) as e:
                raise ValueError(f"{path}:{line_no}: {e}") from e
    logger.info(f"Measured {len(records)} sequences from {path}")
    return records


def read_database(path: str, extractor: Optional[FeatureExtractor] = None,
                  feature_normalizer: float = 1.0) -> List[QualityRecord]:
    """Precomputed loss rows or a video listing, chosen by the header."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if "reference" in header and "distorted" in header:
        return read_video_listing(path, extractor, feature_normalizer)
    return read_records_csv(path)


def load_databases(directory: str, extractor: Optional[FeatureExtractor] = None,
                   feature_normalizer: float = 1.0) -> Dict[str, List[QualityRecord]]:
    """One database per CSV file, named after the file stem, in sorted order."""
    root = Path(directory)
    if not root.is_dir():
        raise ValueError(f"Calibration database directory not found: {root}")
    databases = {
        p.stem: read_database(str(p), extractor, feature_normalizer) for p in sorted(root.glob("*.csv"))
    }
    if not databases:
        raise ValueError(f"No database CSV files in {root}")
    logger.info(f"Loaded {len(databases)} calibration databases from {root}")
    return databases


def sequence_loss_vector(reference: Sequence[PlanarFrame], distorted: Sequence[PlanarFrame],
                         extractor: Optional[FeatureExtractor] = None,
                         feature_normalizer: float = 1.0) -> LossVector:
    """Average the per-tile loss vectors over all frames of a sequence."""
    if len(reference) != len(distorted) or not reference:
        raise ValueError(
            f"Need equally many reference and distorted frames, got {len(reference)} and {len(distorted)}"
        )
    vectors = []
    for ref_frame, dist_frame in zip(reference, distorted):
        ref_blocks, _ = segment_blocks(ref_frame)
        dist_blocks, _ = segment_blocks(dist_frame)
        for ref_block, dist_block in zip(ref_blocks, dist_blocks):
            lv = measure_loss_vector(
                torch.from_numpy(ref_block).unsqueeze(0),
                torch.from_numpy(dist_block).unsqueeze(0),
                extractor, feature_normalizer,
            )
            vectors.append(lv.as_array())
    return LossVector.from_sequence(np.clip(np.mean(vectors, axis=0), 0.0, 1.0).tolist())


def write_calibration(result: CalibrationResult, out_dir: str,
                      baselines: Optional[Mapping[str, float]] = None) -> Path:
    """Write calibration.csv and a human-readable calibration_summary.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    weight_cols = [f"a{i + 1}" for i in range(len(LOSS_NAMES))]

    csv_path = out / "calibration.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split", "held_out", "transform", *weight_cols, "train_srocc", "test_srocc"])
        for i, spec in enumerate(result.per_split_specs):
            held_out = result.database_names[i] if i < len(result.database_names) else str(i)
            train = result.per_split_train_srocc[i] if i < len(result.per_split_train_srocc) else ""
            writer.writerow([i, held_out, spec.transform_id, *spec.weights, train, result.per_split_srocc[i]])
        writer.writerow(["final", "", result.final_spec.transform_id, *result.final_spec.weights,
                         "", result.mean_test_srocc])

    lines = [
        f"Splits: {len(result.per_split_specs)}",
        f"Final transform: {result.final_spec.transform_id}",
        "Final weights: " + ", ".join(
            f"{col}={w:.4f}" for col, w in zip(weight_cols, result.final_spec.weights)
        ),
        f"Weight sum: {result.final_spec.weight_sum:.12f}",
        f"Mean held-out SROCC: {result.mean_test_srocc:.4f}",
    ]
    for i, value in enumerate(result.per_split_srocc):
        held_out = result.database_names[i] if i < len(result.database_names) else str(i)
        lines.append(f"  held out {held_out}: SROCC {value:.4f}")
    if baselines:
        lines.append("Single-loss baselines (mean SROCC over all databases):")
        lines.extend(f"  {name}: {value:.4f}" for name, value in baselines.items())
    (out / "calibration_summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    logger.info(f"Calibration written to {csv_path}")
    return csv_path
