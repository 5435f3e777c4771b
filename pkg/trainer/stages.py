"""Stage 1 (perceptual loss only) and stage 2 (adversarial, hypersphere objective) training."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

import torch
import torch.nn as nn
from torch.utils.data import DataLoader

from losscal.combined import perceptual_loss_lp
from models import NetConfig, ReSphereConfig, TrainConfig
from nnarch.checkpoint import CheckpointError, load_generator, save_checkpoint
from nnarch.discriminator import FeatureDiscriminator, build_discriminator
from nnarch.generator import CVENet, build_generator
from spheregan.losses import discriminator_loss, generator_adv_loss
from trainer.dataset import PairDataset
from trainer.history import LossHistory


logger = logging.getLogger(__name__)

LossFn = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]


class NonFiniteLossError(RuntimeError):
    """A loss or parameter became NaN or infinite."""

    def __init__(self, epoch: int, step: int, loss_name: str, value: float):
        super().__init__(f"Non-finite {loss_name}={value} at epoch {epoch}, step {step}")
        self.epoch = epoch
        self.step = step
        self.loss_name = loss_name
        self.value = value


@dataclass
class Stage1Result:
    generator: CVENet
    history: LossHistory
    checkpoint: Optional[Path] = None


@dataclass
class Stage2Result:
    generator: CVENet
    discriminator: FeatureDiscriminator
    history: LossHistory
    generator_checkpoint: Optional[Path] = None
    discriminator_checkpoint: Optional[Path] = None


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """lr0 * factor^(epoch // every) in lr decay mode, constant lr0 otherwise."""
    if cfg.decay_mode != "lr":
        return cfg.lr0
    return cfg.lr0 * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_every)


def make_optimizer(params: Iterable[nn.Parameter], cfg: TrainConfig) -> torch.optim.Adam:
    weight_decay = cfg.lr_decay_factor if cfg.decay_mode == "weight_decay" else 0.0
    return torch.optim.Adam(params, lr=cfg.lr0, betas=(cfg.beta1, cfg.beta2), weight_decay=weight_decay)


def make_loader(dataset: PairDataset, cfg: TrainConfig) -> DataLoader:
    if len(dataset) == 0:
        raise ValueError("Training dataset is empty")
    generator = torch.Generator().manual_seed(cfg.seed)
    return DataLoader(dataset, batch_size=cfg.batch_size, shuffle=True, generator=generator)


def _set_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


def _check_loss(value: torch.Tensor, epoch: int, step: int, name: str) -> float:
    scalar = float(value.detach())
    if not math.isfinite(scalar):
        raise NonFiniteLossError(epoch, step, name, scalar)
    return scalar


def _check_parameters(model: nn.Module, epoch: int, step: int) -> None:
    for name, param in model.named_parameters():
        if not torch.isfinite(param).all():
            raise NonFiniteLossError(epoch, step, f"parameter {name}", float("nan"))


def _step(optimizer: torch.optim.Optimizer, model: nn.Module, cfg: TrainConfig) -> None:
    if cfg.grad_clip is not None:
        torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
    optimizer.step()


def stage1_train(dataset: PairDataset, cfg: TrainConfig, net_cfg: NetConfig,
                 generator: Optional[CVENet] = None, out_dir: Optional[str] = None,
                 loss_fn: LossFn = perceptual_loss_lp, identity_init: bool = False) -> Stage1Result:
    """Minimize the perceptual loss with Adam and a step learning-rate schedule."""
    torch.manual_seed(cfg.seed)
    loader = make_loader(dataset, cfg)
    device = torch.device(cfg.device)
    if generator is None:
        generator = build_generator(net_cfg, identity_init=identity_init)
    generator.to(device).train()
    optimizer = make_optimizer(generator.parameters(), cfg)
    history = LossHistory()

    step = 0
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg, epoch)
        _set_lr(optimizer, lr)
        history.add(epoch, step, "lr", lr)
        for degraded, target in loader:
            degraded, target = degraded.to(device), target.to(device)
            optimizer.zero_grad()
            loss = loss_fn(generator(degraded), target)
            value = _check_loss(loss, epoch, step, "g_perceptual")
            loss.backward()
            _step(optimizer, generator, cfg)
            if cfg.check_finite:
                _check_parameters(generator, epoch, step)
            history.add(epoch, step, "g_perceptual", value)
            step += 1
        means = history.close_epoch(epoch, step, ["g_perceptual"])
        logger.info(f"Stage 1 epoch {epoch + 1}/{cfg.epochs}: L_P {means['g_perceptual']:.6f} lr {lr:.2e}")

    result = Stage1Result(generator, history)
    if out_dir is not None:
        root = Path(out_dir)
        result.checkpoint = save_checkpoint(str(root / "generator_stage1.pt"), generator, "generator",
                                            net_cfg, {"stage": 1, "epochs": cfg.epochs})
        history.to_csv(str(root / "stage1_history.csv"))
    return result


def _resolve_generator(source: Union[str, Path, CVENet], net_cfg: NetConfig) -> CVENet:
    if isinstance(source, (str, Path)):
        return load_generator(str(source), net_cfg)
    if getattr(source, "cfg", None) != net_cfg:
        raise CheckpointError(f"Generator config {getattr(source, 'cfg', None)} does not match {net_cfg}")
    return source


def stage2_train(generator_source: Union[str, Path, CVENet], dataset: PairDataset, cfg: TrainConfig,
                 net_cfg: NetConfig, resphere: Optional[ReSphereConfig] = None,
                 out_dir: Optional[str] = None, loss_fn: LossFn = perceptual_loss_lp) -> Stage2Result:
    """Alternate discriminator and generator updates under the hypersphere objective."""
    torch.manual_seed(cfg.seed)
    loader = make_loader(dataset, cfg)
    device = torch.device(cfg.device)
    resphere = resphere or ReSphereConfig(cfg.num_moments, cfg.adv_weight, net_cfg.feature_dim)
    if resphere.feature_dim != net_cfg.feature_dim:
        raise ValueError(f"Feature dim {resphere.feature_dim} differs from network {net_cfg.feature_dim}")

    generator = _resolve_generator(generator_source, net_cfg).to(device).train()
    discriminator = build_discriminator(net_cfg, seed=cfg.seed + 1).to(device).train()
    opt_g = make_optimizer(generator.parameters(), cfg)
    opt_d = make_optimizer(discriminator.parameters(), cfg)
    history = LossHistory()
    names = ["d_loss", "g_perceptual", "g_adv", "g_total"]

    step = 0
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg, epoch)
        _set_lr(opt_g, lr)
        _set_lr(opt_d, lr)
        history.add(epoch, step, "lr", lr)
        for degraded, target in loader:
            degraded, target = degraded.to(device), target.to(device)
            fake = generator(degraded)

            for _ in range(cfg.disc_steps):
                opt_d.zero_grad()
                d_loss = discriminator_loss(discriminator(target), discriminator(fake.detach()), resphere)
                d_value = _check_loss(d_loss, epoch, step, "d_loss")
                d_loss.backward()
                _step(opt_d, discriminator, cfg)

            opt_g.zero_grad()
            with torch.no_grad():
                real_features = discriminator(target)
            adv = generator_adv_loss(real_features, discriminator(fake), resphere)
            perceptual = loss_fn(fake, target)
            total = perceptual + resphere.adv_weight * adv
            g_value = _check_loss(total, epoch, step, "g_total")
            total.backward()
            _step(opt_g, generator, cfg)
            opt_d.zero_grad()

            if cfg.check_finite:
                _check_parameters(generator, epoch, step)
                _check_parameters(discriminator, epoch, step)
            history.add(epoch, step, "d_loss", d_value)
            history.add(epoch, step, "g_perceptual", float(perceptual.detach()))
            history.add(epoch, step, "g_adv", float(adv.detach()))
            history.add(epoch, step, "g_total", g_value)
            step += 1
        means = history.close_epoch(epoch, step, names)
        logger.info(
            f"Stage 2 epoch {epoch + 1}/{cfg.epochs}: D {means['d_loss']:.6f} "
            f"G {means['g_total']:.6f} (L_P {means['g_perceptual']:.6f}, adv {means['g_adv']:.6f}) lr {lr:.2e}"
        )

    result = Stage2Result(generator, discriminator, history)
    if out_dir is not None:
        root = Path(out_dir)
        extra = {"stage": 2, "epochs": cfg.epochs}
        result.generator_checkpoint = save_checkpoint(str(root / "generator_stage2.pt"), generator,
                                                      "generator", net_cfg, extra)
        result.discriminator_checkpoint = save_checkpoint(str(root / "discriminator_stage2.pt"),
                                                          discriminator, "discriminator", net_cfg, extra)
        history.to_csv(str(root / "stage2_history.csv"))
    return result
