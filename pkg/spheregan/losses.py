"""Generator and discriminator objectives on the hypersphere."""

import logging

import torch

from models import ReSphereConfig
from spheregan.geometry import as_tensor, north_pole_distance, relativistic_distance


logger = logging.getLogger(__name__)


def _check_batches(real: torch.Tensor, fake: torch.Tensor) -> None:
    if real.dim() != 2 or fake.dim() != 2:
        raise ValueError(f"Feature batches must be B x n, got {tuple(real.shape)} and {tuple(fake.shape)}")
    if real.shape != fake.shape:
        raise ValueError(f"Real/fake batch mismatch: {tuple(real.shape)} vs {tuple(fake.shape)}")


def _relativistic_moment(real: torch.Tensor, fake: torch.Tensor, m: int, pairing: str) -> torch.Tensor:
    if pairing == "cross":
        return relativistic_distance(real.unsqueeze(1), fake.unsqueeze(0), m).mean()
    return relativistic_distance(real, fake, m).mean()


def moment_sums(real, fake, cfg: ReSphereConfig):
    """Sums over m = 1..M of the batch-averaged distances.

    Returns (fake to north pole, real to north pole, real to fake).
    """
    real, fake = as_tensor(real), as_tensor(fake)
    _check_batches(real, fake)
    fake_pole = real.new_zeros(())
    real_pole = real.new_zeros(())
    relative = real.new_zeros(())
    for m in range(1, cfg.num_moments + 1):
        fake_pole = fake_pole + north_pole_distance(fake, m).mean()
        real_pole = real_pole + north_pole_distance(real, m).mean()
        relative = relative + _relativistic_moment(real, fake, m, cfg.pairing)
    return fake_pole, real_pole, relative


def generator_adv_loss(real, fake, cfg: ReSphereConfig) -> torch.Tensor:
    """-sum_m E[d^m(N, T(x_f))] + sum_m E[d^m(T(x_r), T(x_f))]."""
    fake_pole, _, relative = moment_sums(real, fake, cfg)
    return -fake_pole + relative


def discriminator_loss(real, fake, cfg: ReSphereConfig) -> torch.Tensor:
    """sum_m E[d^m(N, T(x_f))] - sum_m E[d^m(N, T(x_r))] - sum_m E[d^m(T(x_r), T(x_f))]."""
    fake_pole, real_pole, relative = moment_sums(real, fake, cfg)
    return fake_pole - real_pole - relative
