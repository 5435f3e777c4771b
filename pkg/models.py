"""Data models shared by the enhancement, training and evaluation packages."""

import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np


logger = logging.getLogger(__name__)

LOSS_NAMES: Tuple[str, ...] = ("l1", "l2", "grad", "feat", "ssim_loss", "msssim_loss")
CHROMA_FORMATS = ("420", "444")
TOOLS = ("PP", "SRA")
CODEC_MODES = ("builtin-stub", "external-command")
FEATURE_EXTRACTORS = ("identity", "random", "vgg19")
DEFAULT_QPS: Tuple[int, ...] = (22, 27, 32, 37)


@dataclass(frozen=True)
class LossVector:
    """The six single losses L1..L6 between two blocks, each within [0, 1]."""

    l1: float
    l2: float
    grad: float
    feat: float
    ssim_loss: float
    msssim_loss: float

    def __post_init__(self):
        for name in LOSS_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0 or value > 1.0:
                raise ValueError(f"Loss component {name}={value} outside [0, 1]")

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "LossVector":
        if len(values) != len(LOSS_NAMES):
            raise ValueError(f"Expected {len(LOSS_NAMES)} loss values, got {len(values)}")
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in LOSS_NAMES], dtype=np.float64)

    def to_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in LOSS_NAMES}


@dataclass(frozen=True)
class QualityRecord:
    """One calibration row: measured losses of a sequence and its subjective score."""

    sequence_id: str
    losses: LossVector
    subjective_score: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sequence_id": self.sequence_id,
            **self.losses.to_dict(),
            "score": self.subjective_score
        }


@dataclass(frozen=True)
class LossSpec:
    """Elementary transform plus the six combination weights a1..a6."""

    transform_id: str
    weights: Tuple[float, ...]

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        if len(weights) != len(LOSS_NAMES):
            raise ValueError(f"LossSpec needs {len(LOSS_NAMES)} weights, got {len(weights)}")
        if any(not math.isfinite(w) or w < 0.0 or w > 1.0 for w in weights):
            raise ValueError(f"LossSpec weights must lie in [0, 1]: {weights}")
        object.__setattr__(self, "weights", weights)

    @property
    def weight_sum(self) -> float:
        return float(sum(self.weights))

    def sort_key(self) -> Tuple[str, Tuple[float, ...]]:
        return (self.transform_id, self.weights)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "transform": self.transform_id,
            **{f"a{i + 1}": w for i, w in enumerate(self.weights)}
        }


@dataclass
class CalibrationResult:
    """Outcome of the k-fold loss calibration."""

    per_split_specs: List[LossSpec]
    per_split_srocc: List[float]
    final_spec: LossSpec
    per_split_train_srocc: List[float] = field(default_factory=list)
    database_names: List[str] = field(default_factory=list)

    @property
    def mean_test_srocc(self) -> float:
        return float(np.mean(self.per_split_srocc)) if self.per_split_srocc else float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "splits": [
                {
                    "held_out": self.database_names[i] if i < len(self.database_names) else str(i),
                    "spec": spec.to_dict(),
                    "test_srocc": self.per_split_srocc[i],
                }
                for i, spec in enumerate(self.per_split_specs)
            ],
            "final_spec": self.final_spec.to_dict(),
            "mean_test_srocc": self.mean_test_srocc
        }


@dataclass(frozen=True)
class ReSphereConfig:
    """Moment count, adversarial weight and feature dimension of ReSphereGAN."""

    num_moments: int = 3
    adv_weight: float = 0.005
    feature_dim: int = 1024
    pairing: str = "index"

    def __post_init__(self):
        if self.num_moments < 1:
            raise ValueError(f"num_moments must be >= 1, got {self.num_moments}")
        if self.adv_weight < 0.0:
            raise ValueError(f"adv_weight must be >= 0, got {self.adv_weight}")
        if self.feature_dim < 1:
            raise ValueError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if self.pairing not in ("index", "cross"):
            raise ValueError(f"pairing must be 'index' or 'cross', got {self.pairing!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class NetConfig:
    """Generator and discriminator hyper-parameters."""

    width: int = 64
    num_mul2res: int = 4
    ecbam_reduction: int = 16
    seed: int = 0
    nonlocal_pool: int = 1
    disc_width: int = 64
    feature_dim: int = 1024
    block_size: int = 96

    def __post_init__(self):
        if self.width < 4 or self.width % 4:
            raise ValueError(f"width must be >= 4 and divisible by 4, got {self.width}")
        if self.num_mul2res < 1:
            raise ValueError(f"num_mul2res must be >= 1, got {self.num_mul2res}")
        if self.ecbam_reduction < 1 or self.width % self.ecbam_reduction:
            raise ValueError(
                f"ecbam_reduction {self.ecbam_reduction} must divide width {self.width}"
            )
        if self.nonlocal_pool < 1:
            raise ValueError(f"nonlocal_pool must be >= 1, got {self.nonlocal_pool}")
        if self.disc_width < 1 or self.feature_dim < 1:
            raise ValueError("disc_width and feature_dim must be positive")
        if self.block_size % 16:
            raise ValueError(f"block_size must be divisible by 16, got {self.block_size}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class TrainConfig:
    """Adam and schedule settings for both training stages."""

    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 16
    epochs: int = 200
    lr0: float = 1e-4
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 100
    decay_mode: str = "lr"
    adv_weight: float = 0.005
    num_moments: int = 3
    seed: int = 0
    grad_clip: Optional[float] = None
    check_finite: bool = False
    disc_steps: int = 1
    device: str = "cpu"

    def __post_init__(self):
        positive = {
            "beta1": self.beta1, "beta2": self.beta2, "batch_size": self.batch_size,
            "epochs": self.epochs, "lr0": self.lr0, "lr_decay_factor": self.lr_decay_factor,
            "lr_decay_every": self.lr_decay_every, "num_moments": self.num_moments,
            "disc_steps": self.disc_steps
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"TrainConfig.{name} must be positive, got {value}")
        if self.adv_weight < 0:
            raise ValueError(f"TrainConfig.adv_weight must be >= 0, got {self.adv_weight}")
        if self.decay_mode not in ("lr", "weight_decay"):
            raise ValueError(f"decay_mode must be 'lr' or 'weight_decay', got {self.decay_mode!r}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError(f"grad_clip must be positive when set, got {self.grad_clip}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class LossRecord:
    """One entry of a training loss history."""

    epoch: int
    step: int
    loss_name: str
    value: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class PlanarFrame:
    """One video frame as Y/Cb/Cr sample planes (rows x columns)."""

    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray
    bit_depth: int = 8
    chroma_format: str = "420"

    def __post_init__(self):
        if self.bit_depth not in (8, 10):
            raise ValueError(f"bit_depth must be 8 or 10, got {self.bit_depth}")
        if self.chroma_format not in CHROMA_FORMATS:
            raise ValueError(f"chroma_format must be one of {CHROMA_FORMATS}, got {self.chroma_format!r}")
        self.y = np.asarray(self.y, dtype=np.int32)
        self.cb = np.asarray(self.cb, dtype=np.int32)
        self.cr = np.asarray(self.cr, dtype=np.int32)
        if self.y.ndim != 2:
            raise ValueError(f"Luma plane must be 2-D, got shape {self.y.shape}")
        expected = self.chroma_shape(self.height, self.width, self.chroma_format)
        for name, plane in (("cb", self.cb), ("cr", self.cr)):
            if plane.shape != expected:
                raise ValueError(
                    f"{name} plane shape {plane.shape} inconsistent with "
                    f"{self.chroma_format} luma {self.y.shape}"
                )
        for name, plane in (("y", self.y), ("cb", self.cb), ("cr", self.cr)):
            if plane.size and (plane.min() < 0 or plane.max() > self.peak):
                raise ValueError(f"{name} samples outside [0, {self.peak}]")

    @staticmethod
    def chroma_shape(height: int, width: int, chroma_format: str) -> Tuple[int, int]:
        if chroma_format == "444":
            return (height, width)
        if height % 2 or width % 2:
            raise ValueError(f"4:2:0 frames need even dimensions, got {width}x{height}")
        return (height // 2, width // 2)

    @property
    def height(self) -> int:
        return int(self.y.shape[0])

    @property
    def width(self) -> int:
        return int(self.y.shape[1])

    @property
    def peak(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def geometry(self) -> Tuple[int, int, int, str]:
        return (self.width, self.height, self.bit_depth, self.chroma_format)

    def copy(self) -> "PlanarFrame":
        return PlanarFrame(self.y.copy(), self.cb.copy(), self.cr.copy(), self.bit_depth, self.chroma_format)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "width": self.width,
            "height": self.height,
            "bit_depth": self.bit_depth,
            "chroma_format": self.chroma_format
        }


@dataclass(frozen=True)
class TileMap:
    """Block placement used to segment a frame and aggregate it back."""

    positions: Tuple[Tuple[int, int], ...]
    frame_height: int
    frame_width: int
    padded_height: int
    padded_width: int
    bit_depth: int
    chroma_format: str
    block_size: int = 96
    overlap: int = 4

    @property
    def stride(self) -> int:
        return self.block_size - self.overlap

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["positions"] = [list(p) for p in self.positions]
        return data


@dataclass(frozen=True)
class CodecAdapter:
    """How frames are coded: built-in DCT stub or external encoder/decoder commands."""

    mode: str = "builtin-stub"
    encode_command: Optional[str] = None
    decode_command: Optional[str] = None
    qps: Tuple[int, ...] = DEFAULT_QPS
    fps: float = 30.0
    timeout: int = 3600
    header_bytes: int = 16

    def __post_init__(self):
        if self.mode not in CODEC_MODES:
            raise ValueError(f"Codec mode must be one of {CODEC_MODES}, got {self.mode!r}")
        if self.mode == "external-command" and not (self.encode_command and self.decode_command):
            raise ValueError("external-command mode needs both encode_command and decode_command")
        object.__setattr__(self, "qps", tuple(int(q) for q in self.qps))
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.header_bytes < 1:
            raise ValueError("header_bytes must be >= 1 so every bitstream has a size")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["qps"] = list(self.qps)
        return data


@dataclass
class CommandRequest:
    """External command execution request built from a template."""

    template: str
    params: Dict[str, Any]
    timeout: int = 3600

    def to_dict(self) -> Dict[str, Any]:
        return {
            "template": self.template,
            "params": {k: str(v) for k, v in self.params.items()},
            "timeout": self.timeout
        }


@dataclass
class CommandResult:
    """Command execution result."""

    command: str
    success: bool
    output: str
    error: Optional[str]
    execution_time: float
    timestamp: datetime
    return_code: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "success": self.success,
            "output": self.output,
            "error": self.error,
            "execution_time": self.execution_time,
            "timestamp": self.timestamp.isoformat(),
            "return_code": self.return_code
        }


@dataclass(frozen=True)
class SequenceSpec:
    """A source sequence for evaluation: a raw file or a synthetic generator seed."""

    name: str
    width: int
    height: int
    path: Optional[str] = None
    bit_depth: int = 8
    fps: float = 30.0
    num_frames: Optional[int] = None
    file_format: str = "yuv"
    synthetic_seed: Optional[int] = None

    def __post_init__(self):
        if self.path is None and self.synthetic_seed is None:
            raise ValueError(f"Sequence {self.name!r} needs a path or a synthetic_seed")
        if self.file_format not in ("yuv", "y4m"):
            raise ValueError(f"file_format must be 'yuv' or 'y4m', got {self.file_format!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RDCurve:
    """Rate-distortion points of one codec configuration, ordered by bitrate."""

    points: List[Tuple[float, float]]
    metric_id: str = "PSNR"
    label: str = ""

    def __post_init__(self):
        self.points = [(float(r), float(q)) for r, q in self.points]
        rates = self.rates
        if np.any(rates <= 0):
            raise ValueError(f"Bitrates must be positive: {rates.tolist()}")
        if np.any(np.diff(rates) <= 0):
            raise ValueError(f"Bitrates must be strictly increasing: {rates.tolist()}")
        if np.any(~np.isfinite(self.qualities)):
            raise ValueError(f"Qualities must be finite: {self.qualities.tolist()}")
        if np.any(np.diff(self.qualities) < 0):
            logger.warning(f"RD curve {self.label or self.metric_id} quality decreases with bitrate")

    @property
    def rates(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=np.float64)

    @property
    def qualities(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=np.float64)

    def to_dict(self) -> Dict[str, Any]:
        return {"metric": self.metric_id, "label": self.label, "points": [list(p) for p in self.points]}


@dataclass
class EvalRow:
    """Quality and bitrate of one sequence coded at one QP by one tool."""

    sequence: str
    tool: str
    qp: int
    bitrate_kbps: float
    psnr: float
    ssim: Optional[float]
    msssim: Optional[float]
    external_metric: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class BDRateEntry:
    """BD-rate of the enhanced curve against the anchor for one metric."""

    sequence: str
    metric: str
    bd_rate: Optional[float]
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ComplexityRow:
    """Parameter count and forward time of a model relative to a baseline."""

    name: str
    parameters: int
    parameter_ratio: float
    runtime_ms: float
    runtime_ratio: float
    rss_mb: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EvalReport:
    """Everything an evaluation run produces."""

    tool: str
    rows: List[EvalRow] = field(default_factory=list)
    bd_rates: List[BDRateEntry] = field(default_factory=list)
    errors: Dict[str, str] = field(default_factory=dict)
    complexity: List[ComplexityRow] = field(default_factory=list)
    external_metric_source: Optional[str] = None

    @property
    def has_failures(self) -> bool:
        return bool(self.errors)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tool": self.tool,
            "rows": [r.to_dict() for r in self.rows],
            "bd_rates": [b.to_dict() for b in self.bd_rates],
            "errors": dict(self.errors),
            "complexity": [c.to_dict() for c in self.complexity],
            "external_metric_source": self.external_metric_source
        }


@dataclass
class GradCheckReport:
    """Analytic versus finite-difference gradient agreement at one point."""

    function: str
    moment: int
    max_rel_error: float
    autograd_rel_error: float
    max_abs_grad: float
    finite: bool
    tolerance: float

    @property
    def passed(self) -> bool:
        return (
            self.finite
            and self.max_rel_error < self.tolerance
            and self.autograd_rel_error < self.tolerance
        )

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["passed"] = self.passed
        return data
