"""Rate-distortion evaluation of the anchor codec against codec plus enhancement."""

import asyncio
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from evalcli.bdrate import bd_rate
from evalcli.external_metric import ExternalMetric, ExternalMetricError
from metrics.quality import ms_ssim, ms_ssim_min_size, psnr, ssim
from models import BDRateEntry, CodecAdapter, EvalReport, EvalRow, PlanarFrame, RDCurve, SequenceSpec, TOOLS
from nnarch.checkpoint import load_generator
from videopipe.codec import CodecRunner
from videopipe.enhance import pp_enhance, sra_restore
from videopipe.frames import downsample2x, frame_to_planes
from videopipe.sources import load_sequence


logger = logging.getLogger(__name__)

ANCHOR = "anchor"
METRIC_FIELDS = {"PSNR": "psnr", "SSIM": "ssim", "MS-SSIM": "msssim", "external": "external_metric"}
AVERAGE = "average"

GeneratorSource = Union[str, nn.Module, None]
ResolvedGenerator = Tuple[Optional[nn.Module], Optional[str]]


def bitrate_kbps(num_bytes: int, fps: float, num_frames: int) -> float:
    """Bitstream bytes x 8 x fps / frames, in kbit/s."""
    if num_frames < 1:
        raise ValueError("Bitrate needs at least one frame")
    return num_bytes * 8.0 * fps / num_frames / 1000.0


def frame_quality(reference: Sequence[PlanarFrame],
                  distorted: Sequence[PlanarFrame]) -> Tuple[float, float, Optional[float]]:
    """Frame-averaged luma PSNR, SSIM and MS-SSIM (None when frames are too small)."""
    if len(reference) != len(distorted) or not reference:
        raise ValueError(f"Need equally many frames, got {len(reference)} and {len(distorted)}")
    psnrs, ssims, msssims = [], [], []
    min_side = ms_ssim_min_size()
    with torch.no_grad():
        for ref, dist in zip(reference, distorted):
            psnrs.append(psnr(ref, dist))
            a = torch.from_numpy(frame_to_planes(ref)).unsqueeze(0)
            b = torch.from_numpy(frame_to_planes(dist)).unsqueeze(0)
            ssims.append(float(ssim(a, b)))
            if min(ref.height, ref.width) >= min_side:
                msssims.append(float(ms_ssim(a, b)))
    msssim = float(np.mean(msssims)) if len(msssims) == len(reference) else None
    return float(np.mean(psnrs)), float(np.mean(ssims)), msssim


@dataclass
class SequenceOutcome:
    name: str
    rows: List[EvalRow] = field(default_factory=list)
    errors: Dict[str, str] = field(default_factory=dict)


class ToolEvaluator:
    """Runs the anchor and enhanced pipelines of one tool over the QP ladder.

    `per_qp` maps a QP to the (generator, load error) trained for that sub-group; QPs without an
    entry fall back to `generator`.
    """

    def __init__(self, adapter: CodecAdapter, tool: str, generator: Optional[nn.Module],
                 generator_error: Optional[str] = None, num_frames: Optional[int] = None,
                 external_metric: Optional[ExternalMetric] = None, batch_size: int = 16,
                 device: str = "cpu", runner: Optional[CodecRunner] = None,
                 per_qp: Optional[Mapping[int, ResolvedGenerator]] = None):
        if tool not in TOOLS:
            raise ValueError(f"tool must be one of {TOOLS}, got {tool!r}")
        self.adapter = adapter
        self.tool = tool
        self.generator = generator
        self.generator_error = generator_error
        self.num_frames = num_frames
        self.external_metric = external_metric
        self.batch_size = batch_size
        self.device = device
        self.runner = runner or CodecRunner(adapter)
        self.per_qp = dict(per_qp or {})

    def generator_for(self, qp: int) -> nn.Module:
        model, error = self.per_qp.get(qp, (self.generator, self.generator_error))
        if model is None:
            raise RuntimeError(f"No generator available for QP {qp}: {error or 'not configured'}")
        return model

    async def _row(self, outcome: SequenceOutcome, tool: str, qp: int, num_bytes: int, fps: float,
                   source: Sequence[PlanarFrame], decoded: Sequence[PlanarFrame]) -> EvalRow:
        psnr_value, ssim_value, msssim_value = await asyncio.to_thread(frame_quality, source, decoded)
        external = None
        if self.external_metric is not None:
            try:
                external = await self.external_metric.measure(source, decoded)
            except (ExternalMetricError, ValueError) as e:
                logger.error(f"❌ External metric failed for {outcome.name} {tool} QP {qp}: {e}")
                outcome.errors[f"{outcome.name}/{tool}/qp{qp}/external"] = str(e)
        row = EvalRow(outcome.name, tool, qp, bitrate_kbps(num_bytes, fps, len(source)),
                      psnr_value, ssim_value, msssim_value, external)
        outcome.rows.append(row)
        return row

    async def _enhance(self, source: Sequence[PlanarFrame], anchor_decoded: Sequence[PlanarFrame],
                       anchor_bytes: int, qp: int) -> Tuple[List[PlanarFrame], int]:
        generator = self.generator_for(qp)
        if self.tool == "PP":
            enhanced = await asyncio.to_thread(pp_enhance, anchor_decoded, generator,
                                               self.batch_size, self.device)
            return enhanced, anchor_bytes
        low = await asyncio.to_thread(lambda: [downsample2x(f) for f in source])
        decoded_low, low_bytes = await self.runner.run(low, qp)
        restored = await asyncio.to_thread(sra_restore, decoded_low, generator,
                                           self.batch_size, self.device)
        return restored, low_bytes

    async def evaluate_sequence(self, spec: SequenceSpec) -> SequenceOutcome:
        """Rows for every QP; failures are recorded on the outcome instead of raised."""
        outcome = SequenceOutcome(spec.name)
        try:
            source = await asyncio.to_thread(load_sequence, spec, self.num_frames)
            for qp in self.adapter.qps:
                decoded, num_bytes = await self.runner.run(source, qp)
                await self._row(outcome, ANCHOR, qp, num_bytes, spec.fps, source, decoded)
                enhanced, enhanced_bytes = await self._enhance(source, decoded, num_bytes, qp)
                row = await self._row(outcome, self.tool, qp, enhanced_bytes, spec.fps, source, enhanced)
                logger.info(f"{spec.name} QP {qp}: {row.bitrate_kbps:.1f} kbps, {self.tool} PSNR {row.psnr:.3f} dB")
        except Exception as e:
            logger.error(f"❌ Evaluation of {spec.name} failed: {e}")
            outcome.errors[spec.name] = str(e)
        return outcome


def _curve(rows: Sequence[EvalRow], attribute: str, metric: str, label: str) -> Optional[RDCurve]:
    points = sorted((r.bitrate_kbps, getattr(r, attribute)) for r in rows)
    if not points or any(q is None for _, q in points):
        return None
    return RDCurve(points, metric, label)


def sequence_bd_rates(name: str, rows: Sequence[EvalRow], tool: str,
                      piecewise: bool = False) -> List[BDRateEntry]:
    """BD-rate of the enhanced curve against the anchor for every available metric."""
    anchor_rows = [r for r in rows if r.tool == ANCHOR]
    test_rows = [r for r in rows if r.tool == tool]
    entries = []
    for metric, attribute in METRIC_FIELDS.items():
        try:
            anchor = _curve(anchor_rows, attribute, metric, f"{name} {ANCHOR}")
            test = _curve(test_rows, attribute, metric, f"{name} {tool}")
            if anchor is None or test is None:
                if metric == "external":
                    continue
                raise ValueError(f"missing {metric} values")
            entries.append(BDRateEntry(name, metric, bd_rate(anchor, test, piecewise)))
        except ValueError as e:
            entries.append(BDRateEntry(name, metric, None, str(e)))
    return entries


def average_bd_rates(entries: Sequence[BDRateEntry]) -> List[BDRateEntry]:
    averages = []
    for metric in METRIC_FIELDS:
        values = [e.bd_rate for e in entries if e.metric == metric and e.bd_rate is not None]
        if values:
            averages.append(BDRateEntry(AVERAGE, metric, float(np.mean(values))))
    return averages


def resolve_generator(generator: GeneratorSource) -> ResolvedGenerator:
    """A loaded generator, or None and the reason it could not be loaded."""
    if generator is None:
        return None, "no checkpoint configured"
    if isinstance(generator, nn.Module):
        return generator, None
    try:
        return load_generator(str(generator)), None
    except Exception as e:
        logger.error(f"❌ Cannot load generator {generator}: {e}")
        return None, str(e)


async def evaluate_tool(sequences: Sequence[SequenceSpec], adapter: CodecAdapter, tool: str = "PP",
                        generator: GeneratorSource = None, num_frames: Optional[int] = None,
                        workers: int = 1, external_metric: Optional[ExternalMetric] = None,
                        piecewise: bool = False, device: str = "cpu",
                        generators: Optional[Mapping[int, GeneratorSource]] = None) -> EvalReport:
    """Evaluate every sequence with a bounded worker pool and merge the results in input order.

    `generators` holds per-QP models (or checkpoint paths); `generator` serves the remaining QPs.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    model, load_error = resolve_generator(generator)
    per_qp = {int(qp): resolve_generator(source) for qp, source in (generators or {}).items()}
    evaluator = ToolEvaluator(adapter, tool, model, load_error, num_frames, external_metric,
                              device=device, per_qp=per_qp)
    semaphore = asyncio.Semaphore(workers)

    async def bounded(spec: SequenceSpec) -> SequenceOutcome:
        async with semaphore:
            return await evaluator.evaluate_sequence(spec)

    outcomes = await asyncio.gather(*(bounded(spec) for spec in sequences))

    report = EvalReport(tool=tool, external_metric_source=external_metric.source if external_metric else None)
    for outcome in outcomes:
        report.rows.extend(outcome.rows)
        report.errors.update(outcome.errors)
        if outcome.name not in outcome.errors:
            report.bd_rates.extend(sequence_bd_rates(outcome.name, outcome.rows, tool, piecewise))
    report.bd_rates.extend(average_bd_rates(report.bd_rates))

    failed = len({o.name for o in outcomes if o.errors})
    status = "✅" if not failed else "❌"
    logger.info(f"{status} Evaluated {len(outcomes)} sequences with {tool}, {failed} with errors")
    return report
