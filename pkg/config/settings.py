"""Configuration loading: .env defaults, YAML file, command-line overrides."""

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import yaml
from dotenv import load_dotenv

from models import FEATURE_EXTRACTORS, CodecAdapter, NetConfig, ReSphereConfig, TrainConfig


logger = logging.getLogger(__name__)

DEFAULT_TRANSFORMS: Tuple[str, ...] = (
    "arcsin", "arsinh", "expm1", "identity", "ln", "sin", "sqrt", "square", "tanh"
)


class ConfigError(ValueError):
    """Invalid configuration file, section, key or value."""


def parse_qp_map(entries: Mapping[Any, Any]) -> Dict[int, str]:
    """Normalize a {qp: checkpoint} mapping, rejecting non-integer QPs."""
    if not isinstance(entries, Mapping):
        raise ValueError(f"Expected a mapping of QP to checkpoint path, got {entries!r}")
    mapping = {}
    for qp, path in entries.items():
        try:
            mapping[int(qp)] = str(path)
        except (TypeError, ValueError):
            raise ValueError(f"QP keys must be integers, got {qp!r}") from None
    return mapping


@dataclass(frozen=True)
class CalibrationSettings:
    """Inputs of the loss calibration search."""

    databases_dir: Optional[str] = None
    transforms: Tuple[str, ...] = DEFAULT_TRANSFORMS
    step: float = 0.1
    folds: Optional[int] = None
    polarity: str = "mos"
    workers: int = 1
    feature_normalizer: float = 1.0
    extractor: str = "random"
    pretrained: bool = True

    def __post_init__(self):
        object.__setattr__(self, "transforms", tuple(self.transforms))
        if self.polarity not in ("mos", "dmos"):
            raise ValueError(f"polarity must be 'mos' or 'dmos', got {self.polarity!r}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.feature_normalizer <= 0:
            raise ValueError("feature_normalizer must be positive")
        if self.extractor not in FEATURE_EXTRACTORS:
            raise ValueError(f"extractor must be one of {FEATURE_EXTRACTORS}, got {self.extractor!r}")


@dataclass(frozen=True)
class DatasetSettings:
    """Training-pair generation inputs."""

    sources: Tuple[Dict[str, Any], ...] = ()
    tool: str = "PP"
    pairs_per_qp: int = 64
    frames_per_source: int = 1
    output_dir: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(dict(s) for s in self.sources))
        if self.tool not in ("PP", "SRA"):
            raise ValueError(f"tool must be 'PP' or 'SRA', got {self.tool!r}")
        if self.pairs_per_qp < 1 or self.frames_per_source < 1:
            raise ValueError("pairs_per_qp and frames_per_source must be >= 1")


@dataclass(frozen=True)
class EvaluationSettings:
    """Evaluation run inputs."""

    sequences: Tuple[Dict[str, Any], ...] = ()
    tool: str = "PP"
    checkpoint: Optional[str] = None
    checkpoints: Dict[int, str] = field(default_factory=dict)
    num_frames: Optional[int] = None
    workers: int = 1
    external_metric_command: Optional[str] = None
    piecewise: bool = False
    complexity_checkpoints: Tuple[str, ...] = ()
    complexity_batch: int = 2

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(dict(s) for s in self.sequences))
        object.__setattr__(self, "complexity_checkpoints", tuple(self.complexity_checkpoints))
        object.__setattr__(self, "checkpoints", parse_qp_map(self.checkpoints))
        if self.tool not in ("PP", "SRA"):
            raise ValueError(f"tool must be 'PP' or 'SRA', got {self.tool!r}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass
class Settings:
    """Fully resolved configuration of one run."""

    seed: int = 0
    out_dir: str = "out"
    net: NetConfig = field(default_factory=NetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    resphere: ReSphereConfig = field(default_factory=ReSphereConfig)
    codec: CodecAdapter = field(default_factory=CodecAdapter)
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)
    dataset: DatasetSettings = field(default_factory=DatasetSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


SECTIONS = {
    "net": NetConfig,
    "train": TrainConfig,
    "resphere": ReSphereConfig,
    "codec": CodecAdapter,
    "calibration": CalibrationSettings,
    "dataset": DatasetSettings,
    "evaluation": EvaluationSettings,
}
TOP_LEVEL_KEYS = ("seed", "out_dir")


def parse_override(text: str) -> Tuple[List[str], Any]:
    """Split a `section.key=value` override, parsing the value as a YAML scalar."""
    if "=" not in text:
        raise ConfigError(f"Override {text!r} must look like section.key=value")
    dotted, raw = text.split("=", 1)
    path = [part for part in dotted.strip().split(".") if part]
    if not path or len(path) > 2:
        raise ConfigError(f"Override key {dotted!r} must be 'key' or 'section.key'")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise ConfigError(f"Cannot parse override value {raw!r}: {e}") from e
    return path, value


def _env_layer() -> Dict[str, Any]:
    layer: Dict[str, Any] = {}
    if os.getenv("CVEGAN_SEED"):
        layer["seed"] = _as_int("CVEGAN_SEED", os.environ["CVEGAN_SEED"])
    if os.getenv("CVEGAN_OUT_DIR"):
        layer["out_dir"] = os.environ["CVEGAN_OUT_DIR"]
    if os.getenv("CVEGAN_DEVICE"):
        layer.setdefault("train", {})["device"] = os.environ["CVEGAN_DEVICE"]
    if os.getenv("CVEGAN_WORKERS"):
        workers = _as_int("CVEGAN_WORKERS", os.environ["CVEGAN_WORKERS"])
        layer.setdefault("calibration", {})["workers"] = workers
        layer.setdefault("evaluation", {})["workers"] = workers
    return layer


def _as_int(name: str, value: str) -> int:
    try:
        return int(value)
    except ValueError as e:
        raise ConfigError(f"{name} must be an integer, got {value!r}") from e


def _read_file(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"Config file not found: {config_path}")
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {config_path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {config_path} must contain a mapping")
    return data


def _merge(base: Dict[str, Any], layer: Mapping[str, Any]) -> None:
    for key, value in layer.items():
        if key in SECTIONS:
            if value is None:
                continue
            if not isinstance(value, Mapping):
                raise ConfigError(f"Section {key!r} must be a mapping")
            base.setdefault(key, {}).update(value)
        elif key in TOP_LEVEL_KEYS:
            base[key] = value
        else:
            raise ConfigError(f"Unknown config section or key: {key!r}")


def _build_section(name: str, values: Dict[str, Any]):
    cls = SECTIONS[name]
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in section {name!r}: {unknown}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid section {name!r}: {e}") from e


def load_settings(path: Optional[str] = None, overrides: Sequence[str] = (),
                  seed: Optional[int] = None, out_dir: Optional[str] = None) -> Settings:
    """Resolve settings from env defaults, a YAML file, overrides and explicit flags."""
    load_dotenv()

    raw: Dict[str, Any] = {}
    _merge(raw, _env_layer())
    _merge(raw, _read_file(path))

    for text in overrides:
        keys, value = parse_override(text)
        if len(keys) == 1:
            _merge(raw, {keys[0]: value})
        else:
            _merge(raw, {keys[0]: {keys[1]: value}})

    if seed is not None:
        raw["seed"] = seed
    if out_dir is not None:
        raw["out_dir"] = out_dir

    resolved_seed = raw.get("seed", 0)
    if not isinstance(resolved_seed, int):
        raise ConfigError(f"seed must be an integer, got {resolved_seed!r}")

    for section in ("net", "train"):
        raw.setdefault(section, {}).setdefault("seed", resolved_seed)
    net_feature_dim = raw["net"].get("feature_dim", NetConfig.feature_dim)
    raw.setdefault("resphere", {}).setdefault("feature_dim", net_feature_dim)

    sections = {name: _build_section(name, raw.get(name, {})) for name in SECTIONS}
    settings = Settings(seed=resolved_seed, out_dir=str(raw.get("out_dir", "out")), **sections)

    logger.debug(f"Resolved settings from {path or 'defaults'}: seed={settings.seed}, out_dir={settings.out_dir}")
    return settings
