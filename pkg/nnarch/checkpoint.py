"""Versioned checkpoint files for generator and discriminator weights."""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

import torch
import torch.nn as nn

from models import NetConfig
from nnarch.discriminator import FeatureDiscriminator, build_discriminator
from nnarch.generator import CVENet, build_generator


logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "cvegan-checkpoint"
CHECKPOINT_VERSION = 1
KINDS = ("generator", "discriminator")


class CheckpointError(RuntimeError):
    """Unreadable, corrupted or mismatching checkpoint."""


def save_checkpoint(path: str, model: nn.Module, kind: str, net_config: NetConfig,
                    extra: Optional[Dict[str, Any]] = None) -> Path:
    if kind not in KINDS:
        raise ValueError(f"Checkpoint kind must be one of {KINDS}, got {kind!r}")
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "net_config": net_config.to_dict(),
        "state_dict": {k: v.detach().cpu() for k, v in model.state_dict().items()},
        "extra": dict(extra or {}),
    }
    torch.save(payload, target)
    logger.info(f"Saved {kind} checkpoint to {target}")
    return target


def load_checkpoint(path: str, kind: Optional[str] = None,
                    expected_config: Optional[NetConfig] = None) -> Dict[str, Any]:
    """Read and validate a checkpoint payload."""
    source = Path(path)
    if not source.is_file():
        raise CheckpointError(f"Checkpoint not found: {source}")
    try:
        payload = torch.load(source, map_location="cpu", weights_only=True)
    except Exception as e:
        raise CheckpointError(f"Cannot read checkpoint {source}: {e}") from e

    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{source} is not a {CHECKPOINT_FORMAT} file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{source}: unsupported checkpoint version {payload.get('version')}, expected {CHECKPOINT_VERSION}"
        )
    if kind is not None and payload.get("kind") != kind:
        raise CheckpointError(f"{source}: expected a {kind} checkpoint, found {payload.get('kind')}")
    try:
        payload["net_config"] = NetConfig(**payload["net_config"])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{source}: invalid network config: {e}") from e
    if expected_config is not None and payload["net_config"] != expected_config:
        raise CheckpointError(
            f"{source}: network config {payload['net_config']} does not match {expected_config}"
        )
    return payload


def _restore(model: nn.Module, payload: Dict[str, Any], path: str) -> None:
    try:
        model.load_state_dict(payload["state_dict"], strict=True)
    except (KeyError, RuntimeError) as e:
        raise CheckpointError(f"{path}: parameters do not fit the network: {e}") from e


def load_generator(path: str, expected_config: Optional[NetConfig] = None) -> CVENet:
    payload = load_checkpoint(path, "generator", expected_config)
    model = build_generator(payload["net_config"])
    _restore(model, payload, path)
    model.eval()
    return model


def load_discriminator(path: str, expected_config: Optional[NetConfig] = None) -> FeatureDiscriminator:
    payload = load_checkpoint(path, "discriminator", expected_config)
    model = build_discriminator(payload["net_config"])
    _restore(model, payload, path)
    model.eval()
    return model


def checkpoint_roundtrip(model: nn.Module, kind: str, net_config: NetConfig, path: str,
                         extra: Optional[Dict[str, Any]] = None) -> nn.Module:
    """Save a model and load it back as a fresh eval-mode instance."""
    save_checkpoint(path, model, kind, net_config, extra)
    if kind == "generator":
        return load_generator(path, net_config)
    return load_discriminator(path, net_config)
