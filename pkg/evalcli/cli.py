"""Command-line surface: calibration, dataset generation, training, enhancement, evaluation."""

import argparse
import asyncio
import csv
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from config.logging import setup_logging
from config.settings import ConfigError, Settings, load_settings, parse_qp_map
from evalcli.complexity import complexity_ledger, load_models
from evalcli.evaluate import evaluate_tool
from evalcli.external_metric import ExternalMetric
from evalcli.report import write_complexity, write_report
from losscal.records import load_databases, write_calibration
from losscal.search import cross_validate, single_loss_baselines
from metrics.features import build_extractor
from models import SequenceSpec
from nnarch.checkpoint import load_generator
from spheregan.gradcheck import run_suite
from trainer.dataset import load_manifest, save_datasets
from trainer.stages import stage1_train, stage2_train
from videopipe.enhance import pp_enhance, sra_restore
from videopipe.pairs import build_training_pairs
from videopipe.sources import load_sequence
from videopipe.yuv_io import read_y4m, read_yuv, write_y4m, write_yuv


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_PARTIAL_FAILURE = 2


def _sequence_specs(entries: Sequence[dict]):
    try:
        return [SequenceSpec(**entry) for entry in entries]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid sequence entry: {e}") from e


def _select_dataset(manifest: str, qp: Optional[int], tool: str):
    datasets = load_manifest(manifest, qp, tool)
    if len(datasets) != 1:
        found = sorted(d.qp for d in datasets)
        raise ConfigError(f"Manifest {manifest} selects {len(datasets)} {tool} datasets (QPs {found}); pass one --qp")
    return datasets[0]


def cmd_calibrate_loss(settings: Settings, args: argparse.Namespace) -> int:
    cal = settings.calibration
    directory = args.databases or cal.databases_dir
    if not directory:
        raise ConfigError("calibrate-loss needs calibration.databases_dir or --databases")
    extractor = build_extractor(cal.extractor, seed=settings.seed, pretrained=cal.pretrained)
    databases = load_databases(directory, extractor, cal.feature_normalizer)
    result = cross_validate(databases, cal.step, cal.transforms, cal.polarity, cal.folds, cal.workers)
    baselines = single_loss_baselines(databases, cal.polarity)
    write_calibration(result, str(Path(settings.out_dir) / "calibration"), baselines)
    return EXIT_OK


def cmd_make_dataset(settings: Settings, args: argparse.Namespace) -> int:
    ds = settings.dataset
    if not ds.sources:
        raise ConfigError("make-dataset needs at least one entry in dataset.sources")
    sources = [load_sequence(spec, ds.frames_per_source) for spec in _sequence_specs(ds.sources)]
    datasets = build_training_pairs(sources, settings.codec, settings.codec.qps, ds.tool,
                                    ds.pairs_per_qp, settings.seed, settings.net.block_size)
    out_dir = ds.output_dir or str(Path(settings.out_dir) / "dataset")
    save_datasets(list(datasets.values()), out_dir)
    return EXIT_OK


def cmd_train_stage1(settings: Settings, args: argparse.Namespace) -> int:
    dataset = _select_dataset(args.manifest, args.qp, args.tool)
    out_dir = Path(settings.out_dir) / f"stage1_{dataset.tool}_qp{dataset.qp}"
    stage1_train(dataset, settings.train, settings.net, out_dir=str(out_dir), identity_init=args.identity_init)
    return EXIT_OK


def cmd_train_stage2(settings: Settings, args: argparse.Namespace) -> int:
    dataset = _select_dataset(args.manifest, args.qp, args.tool)
    out_dir = Path(settings.out_dir) / f"stage2_{dataset.tool}_qp{dataset.qp}"
    stage2_train(args.generator, dataset, settings.train, settings.net, settings.resphere, out_dir=str(out_dir))
    return EXIT_OK


def parse_checkpoint_flags(values: Sequence[str]) -> Tuple[Optional[str], Dict[int, str]]:
    """Split `--checkpoint` values into one fallback path and a {qp: path} map."""
    fallback: Optional[str] = None
    per_qp: Dict[str, str] = {}
    for value in values:
        qp, sep, path = value.partition("=")
        if sep and qp.strip().isdigit():
            per_qp[qp.strip()] = path
        elif fallback is not None:
            raise ConfigError(f"Only one checkpoint without a QP is allowed, got {fallback!r} and {value!r}")
        else:
            fallback = value
    try:
        return fallback, parse_qp_map(per_qp)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _read_frames(args: argparse.Namespace):
    if args.input.endswith(".y4m"):
        frames, fps = read_y4m(args.input, args.frames)
        return frames, fps
    if not (args.width and args.height):
        raise ConfigError("Raw YUV input needs --width and --height")
    frames = read_yuv(args.input, args.width, args.height, args.bit_depth, "420", args.frames)
    return frames, args.fps


def _write_frames(path: str, frames, fps: float) -> None:
    if path.endswith(".y4m"):
        write_y4m(path, frames, fps)
    else:
        write_yuv(path, frames)


def _run_enhancement(settings: Settings, args: argparse.Namespace, restore: bool) -> int:
    generator = load_generator(args.checkpoint)
    frames, fps = _read_frames(args)
    process = sra_restore if restore else pp_enhance
    enhanced = process(frames, generator, device=settings.train.device)
    _write_frames(args.output, enhanced, fps)
    logger.info(f"Wrote {len(enhanced)} frames to {args.output}")
    return EXIT_OK


def cmd_enhance(settings: Settings, args: argparse.Namespace) -> int:
    return _run_enhancement(settings, args, restore=False)


def cmd_sra_restore(settings: Settings, args: argparse.Namespace) -> int:
    return _run_enhancement(settings, args, restore=True)


def cmd_evaluate(settings: Settings, args: argparse.Namespace) -> int:
    ev = settings.evaluation
    if not ev.sequences:
        raise ConfigError("evaluate needs at least one entry in evaluation.sequences")
    external = ExternalMetric(ev.external_metric_command) if ev.external_metric_command else None
    fallback, per_qp = parse_checkpoint_flags(args.checkpoint)
    report = asyncio.run(evaluate_tool(
        _sequence_specs(ev.sequences), settings.codec, ev.tool, fallback or ev.checkpoint,
        ev.num_frames, ev.workers, external, ev.piecewise, settings.train.device,
        generators={**ev.checkpoints, **per_qp},
    ))
    if ev.complexity_checkpoints:
        try:
            models = load_models(ev.complexity_checkpoints)
            report.complexity = complexity_ledger(models, batch_size=ev.complexity_batch)
        except Exception as e:
            logger.error(f"❌ Complexity ledger failed: {e}")
            report.errors["complexity"] = str(e)
    write_report(report, str(Path(settings.out_dir) / "evaluation"))
    return EXIT_PARTIAL_FAILURE if report.has_failures else EXIT_OK


def cmd_gradcheck(settings: Settings, args: argparse.Namespace) -> int:
    reports = run_suite(count=args.count, dim=args.dim, seed=settings.seed)
    out = Path(settings.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "gradcheck.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(reports[0].to_dict()) if reports else ["function"])
        writer.writeheader()
        for report in reports:
            writer.writerow(report.to_dict())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_PARTIAL_FAILURE


def cmd_complexity(settings: Settings, args: argparse.Namespace) -> int:
    paths = args.checkpoints or list(settings.evaluation.complexity_checkpoints)
    rows = complexity_ledger(load_models(paths), baseline=args.baseline,
                             batch_size=settings.evaluation.complexity_batch)
    write_complexity(rows, settings.out_dir)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[Settings, argparse.Namespace], int]] = {
    "calibrate-loss": cmd_calibrate_loss,
    "make-dataset": cmd_make_dataset,
    "train-stage1": cmd_train_stage1,
    "train-stage2": cmd_train_stage2,
    "enhance": cmd_enhance,
    "sra-restore": cmd_sra_restore,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
    "complexity": cmd_complexity,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="Override one config value (repeatable)")
    parser.add_argument("--seed", type=int, help="Global seed")
    parser.add_argument("--out-dir", help="Output directory")
    parser.add_argument("--log-level", help="Logging level (DEBUG, INFO, ...)")


def _add_frames_io(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint", required=True, help="Generator checkpoint")
    parser.add_argument("--input", required=True, help="Decoded .yuv (4:2:0) or .y4m file")
    parser.add_argument("--output", required=True, help="Output .yuv or .y4m file")
    parser.add_argument("--width", type=int)
    parser.add_argument("--height", type=int)
    parser.add_argument("--bit-depth", type=int, default=8)
    parser.add_argument("--fps", type=float, default=30.0)
    parser.add_argument("--frames", type=int, help="Maximum number of frames to process")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvegan", description="Compressed video enhancement toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    parsers = {name: sub.add_parser(name) for name in COMMANDS}
    for p in parsers.values():
        _add_common(p)

    parsers["calibrate-loss"].add_argument("--databases", help="Directory with one CSV per database")
    for name in ("train-stage1", "train-stage2"):
        parsers[name].add_argument("--manifest", required=True, help="Dataset manifest.csv")
        parsers[name].add_argument("--qp", type=int, help="QP sub-group to train on")
        parsers[name].add_argument("--tool", default="PP", choices=["PP", "SRA"])
    parsers["train-stage1"].add_argument("--identity-init", action="store_true",
                                         help="Zero the tail conv so the untrained network is the identity")
    parsers["train-stage2"].add_argument("--generator", required=True, help="Stage-1 generator checkpoint")
    _add_frames_io(parsers["enhance"])
    _add_frames_io(parsers["sra-restore"])
    parsers["evaluate"].add_argument("--checkpoint", action="append", default=[], metavar="[QP=]PATH",
                                     help="Generator checkpoint, optionally for one QP (repeatable)")
    parsers["gradcheck"].add_argument("--count", type=int, default=100)
    parsers["gradcheck"].add_argument("--dim", type=int, default=8)
    parsers["complexity"].add_argument("--checkpoints", nargs="*", default=[])
    parsers["complexity"].add_argument("--baseline", help="Model name used as the ratio baseline")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level)

    try:
        settings = load_settings(args.config, args.overrides, args.seed, args.out_dir)
        return COMMANDS[args.command](settings, args)
    except (ConfigError, ValueError, FileNotFoundError) as e:
        logger.error(f"❌ {args.command}: {e}")
        return EXIT_CONFIG_ERROR
    except Exception as e:
        logger.exception(f"❌ {args.command} failed: {e}")
        return EXIT_CONFIG_ERROR
