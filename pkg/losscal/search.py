"""Exhaustive weight search, leave-one-database-out validation and finalization."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import rankdata

from losscal.transforms import Transform, apply_numpy
from metrics.quality import srocc
from models import LOSS_NAMES, CalibrationResult, LossSpec, QualityRecord


logger = logging.getLogger(__name__)

Databases = Union[Mapping[str, Sequence[QualityRecord]], Sequence[Sequence[QualityRecord]]]

DEFAULT_STEP = 0.1
CHUNK_SIZE = 16384
SROCC_DECIMALS = 12


class MixedTransformError(ValueError):
    """Splits selected different elementary transforms."""


@dataclass(frozen=True)
class SearchOutcome:
    spec: LossSpec
    srocc: float


@dataclass(frozen=True)
class _Table:
    name: str
    losses: np.ndarray
    scores: np.ndarray


def _named(databases: Databases) -> Dict[str, List[QualityRecord]]:
    if isinstance(databases, Mapping):
        return {str(name): list(records) for name, records in databases.items()}
    return {f"db{i}": list(records) for i, records in enumerate(databases)}


def _tables(databases: Dict[str, List[QualityRecord]]) -> List[_Table]:
    if not databases:
        raise ValueError("Loss calibration needs at least one database")
    tables = []
    for name, records in databases.items():
        if len(records) < 2:
            raise ValueError(
                f"Database {name!r} has {len(records)} record(s); SROCC is undefined below 2"
            )
        losses = np.stack([r.losses.as_array() for r in records])
        scores = np.array([r.subjective_score for r in records], dtype=np.float64)
        tables.append(_Table(name, losses, scores))
    return tables


def weight_grid(step: float = DEFAULT_STEP) -> np.ndarray:
    """All (a1..a5, 1) weight rows on the grid, in lexicographic order."""
    if step <= 0 or step > 1:
        raise ValueError(f"Grid step must lie in (0, 1], got {step}")
    count = int(round(1.0 / step))
    if abs(count * step - 1.0) > 1e-9:
        raise ValueError(f"Grid step {step} does not divide 1 evenly")
    values = np.round(np.arange(count + 1) * step, 12)
    mesh = np.meshgrid(*([values] * 5), indexing="ij")
    free = np.stack([m.ravel() for m in mesh], axis=1)
    return np.hstack([free, np.ones((free.shape[0], 1))])


def _sign(polarity: str) -> float:
    if polarity == "mos":
        return -1.0
    if polarity == "dmos":
        return 1.0
    raise ValueError(f"Score polarity must be 'mos' or 'dmos', got {polarity!r}")


def _column_srocc(scores: np.ndarray, subjective: np.ndarray) -> np.ndarray:
    """SROCC of every score column against one subjective vector (NaN where undefined)."""
    ranked = rankdata(scores, axis=0)
    target = rankdata(subjective)
    ranked -= ranked.mean(axis=0, keepdims=True)
    target = target - target.mean()
    numerator = target @ ranked
    denominator = np.sqrt((ranked ** 2).sum(axis=0)) * np.sqrt((target ** 2).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        values = numerator / denominator
    values[denominator == 0] = np.nan
    return np.clip(values, -1.0, 1.0)


def _search_transform(transform: Transform, tables: List[_Table], grid: np.ndarray,
                      sign: float) -> Tuple[int, float]:
    transformed = [apply_numpy(transform, t.losses) for t in tables]
    best_index, best_value = -1, -np.inf
    for start in range(0, grid.shape[0], CHUNK_SIZE):
        chunk = grid[start:start + CHUNK_SIZE]
        total = np.zeros(chunk.shape[0])
        for table, values in zip(tables, transformed):
            total += _column_srocc(sign * (values @ chunk.T), table.scores)
        mean = np.round(total / len(tables), SROCC_DECIMALS)
        mean = np.where(np.isnan(mean), -np.inf, mean)
        index = int(np.argmax(mean))
        if mean[index] > best_value:
            best_index, best_value = start + index, float(mean[index])
    return best_index, best_value


def run_grid_search(databases: Databases, step: float = DEFAULT_STEP,
                    transforms: Optional[Sequence[str]] = None,
                    polarity: str = "mos", workers: int = 1) -> SearchOutcome:
    """Best (transform, weights) by mean per-database SROCC, a6 fixed at 1."""
    tables = _tables(_named(databases))
    grid = weight_grid(step)
    sign = _sign(polarity)
    candidates = sorted({Transform.parse(t) for t in (transforms or [t.value for t in Transform])},
                        key=lambda t: t.value)

    if workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _search_transform(t, tables, grid, sign), candidates))
    else:
        results = [_search_transform(t, tables, grid, sign) for t in candidates]

    best: Optional[SearchOutcome] = None
    for transform, (index, value) in zip(candidates, results):
        logger.info(f"Transform {transform.value}: best mean SROCC {value:.6f}")
        if index < 0 or not np.isfinite(value):
            continue
        if best is None or value > best.srocc:
            spec = LossSpec(transform.value, tuple(float(w) for w in grid[index]))
            best = SearchOutcome(spec, value)

    if best is None:
        raise ValueError("SROCC undefined for every candidate; check the calibration data")
    return best


def grid_search(databases: Databases, step: float = DEFAULT_STEP,
                transforms: Optional[Sequence[str]] = None,
                polarity: str = "mos", workers: int = 1) -> LossSpec:
    return run_grid_search(databases, step, transforms, polarity, workers).spec


def evaluate_spec(spec: LossSpec, databases: Databases, polarity: str = "mos") -> float:
    """Mean per-database SROCC of a fixed spec."""
    sign = _sign(polarity)
    weights = np.asarray(spec.weights)
    values = []
    for table in _tables(_named(databases)):
        scores = sign * (apply_numpy(spec.transform_id, table.losses) @ weights)
        values.append(srocc(scores, table.scores))
    return float(np.mean(values))


def single_loss_baselines(databases: Databases, polarity: str = "mos") -> Dict[str, float]:
    """Mean SROCC of each single loss on its own."""
    baselines = {}
    for index, name in enumerate(LOSS_NAMES):
        weights = tuple(1.0 if i == index else 0.0 for i in range(len(LOSS_NAMES)))
        baselines[name] = evaluate_spec(LossSpec("identity", weights), databases, polarity)
    return baselines


def finalize(per_split_specs: Sequence[LossSpec]) -> LossSpec:
    """Component-wise median of the split weights, normalized to sum 1."""
    if not per_split_specs:
        raise ValueError("finalize needs at least one split spec")
    transforms = sorted({s.transform_id for s in per_split_specs})
    if len(transforms) > 1:
        raise MixedTransformError(f"Splits disagree on the elementary transform: {transforms}")
    medians = np.median(np.array([s.weights for s in per_split_specs]), axis=0)
    total = medians.sum()
    if total <= 0:
        raise ValueError("Median weights are all zero; cannot normalize")
    return LossSpec(transforms[0], tuple(float(w) for w in medians / total))


def cross_validate(databases: Databases, step: float = DEFAULT_STEP,
                   transforms: Optional[Sequence[str]] = None,
                   polarity: str = "mos", folds: Optional[int] = None,
                   workers: int = 1) -> CalibrationResult:
    """Leave-one-database-out search; each split holds out one database."""
    named = _named(databases)
    k = len(named) if folds is None else folds
    if k < 2:
        raise ValueError(f"Cross validation needs k >= 2, got {k}")
    if k != len(named):
        raise ValueError(f"k={k} folds requested for {len(named)} databases")

    names = list(named)
    specs, test_srocc, train_srocc = [], [], []
    for held_out in names:
        training = {name: named[name] for name in names if name != held_out}
        outcome = run_grid_search(training, step, transforms, polarity, workers)
        tested = evaluate_spec(outcome.spec, {held_out: named[held_out]}, polarity)
        specs.append(outcome.spec)
        train_srocc.append(outcome.srocc)
        test_srocc.append(tested)
        logger.info(
            f"Split holding out {held_out}: {outcome.spec.transform_id} "
            f"{outcome.spec.weights} train SROCC {outcome.srocc:.4f} test SROCC {tested:.4f}"
        )

    final = finalize(specs)
    result = CalibrationResult(
        per_split_specs=specs,
        per_split_srocc=test_srocc,
        final_spec=final,
        per_split_train_srocc=train_srocc,
        database_names=names,
    )
    logger.info(
        f"✅ Calibrated loss {final.transform_id} {final.weights}, "
        f"mean test SROCC {result.mean_test_srocc:.4f}"
    )
    return result
