"""Loss functions for the adversarially trained motion VAE."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .config import VaeConfig
from .features import FeatureStats, recover_global_joints


class LossError(ValueError):
    pass


def kl_divergence(mean: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """KL(q || N(0, I)) summed over latent dims, averaged over the batch."""
    per_sample = 0.5 * (mean.pow(2) + logvar.exp() - 1.0 - logvar)
    return per_sample.reshape(per_sample.shape[0], -1).sum(dim=1).mean()


def _position_term(
    x: torch.Tensor,
    m_hat: torch.Tensor,
    act: torch.Tensor,
    stats: FeatureStats,
    n_joints: int,
) -> torch.Tensor:
    """MSE between recovered global joints of target and reconstruction."""
    mean = torch.as_tensor(stats.mean, dtype=x.dtype, device=x.device)
    std = torch.as_tensor(stats.std, dtype=x.dtype, device=x.device)
    x_hat = torch.cat([m_hat, act.unsqueeze(1)], dim=1)

    def joints(feats_cl: torch.Tensor) -> torch.Tensor:
        denorm = feats_cl.transpose(1, 2) * std + mean
        return recover_global_joints(denorm, n_joints)

    return F.mse_loss(joints(x_hat), joints(x))


def motion_vae_loss(
    x: torch.Tensor,
    m_hat: torch.Tensor,
    a_logits: torch.Tensor,
    mean: torch.Tensor,
    logvar: torch.Tensor,
    cfg: VaeConfig,
    stats: FeatureStats | None = None,
    n_joints: int | None = None,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Reconstruction + activation BCE + KL (+ optional global-position term).

    ``x`` is the normalized target with the binary activation as its last
    channel; ``m_hat``/``a_logits`` are the decoder outputs.  Shapes are
    (batch, channels, frames).
    """
    if m_hat.shape[1] != x.shape[1] - 1 or m_hat.shape[2] != x.shape[2]:
        raise LossError(f"reconstruction shape {tuple(m_hat.shape)} does not match target {tuple(x.shape)}")
    m, a = x[:, :-1], x[:, -1]
    if cfg.recon_loss == "mse":
        recon = F.mse_loss(m_hat, m)
    else:
        recon = F.smooth_l1_loss(m_hat, m)
    act = F.binary_cross_entropy_with_logits(a_logits, a)
    reg = kl_divergence(mean, logvar)
    total = recon + cfg.lambda_act * act + cfg.lambda_reg * reg
    components = {"recon": float(recon.detach()), "act_bce": float(act.detach()), "kl": float(reg.detach())}
    if cfg.position_enhance_weight > 0:
        if stats is None or n_joints is None:
            raise LossError("position enhancement requires stats and n_joints")
        pos = _position_term(x, m_hat, torch.sigmoid(a_logits), stats, n_joints)
        total = total + cfg.position_enhance_weight * pos
        components["position"] = float(pos.detach())
    return total, components


def discriminator_hinge_loss(f_real: torch.Tensor, f_fake: torch.Tensor) -> torch.Tensor:
    """Hinge objective the discriminator maximizes."""
    zeros_r = torch.zeros_like(f_real)
    zeros_f = torch.zeros_like(f_fake)
    return torch.minimum(zeros_r, -1.0 + f_real).mean() + torch.minimum(zeros_f, -1.0 - f_fake).mean()


def generator_adv_loss(f_fake: torch.Tensor) -> torch.Tensor:
    """Adversarial term the VAE minimizes: -E[f(fake)]."""
    return -f_fake.mean()


def san_discriminator_loss(h_real: torch.Tensor, h_fake: torch.Tensor, omega: torch.Tensor) -> torch.Tensor:
    """Sliced adversarial objective (to maximize).

    The hinge term sees a stop-gradient on the direction, the direction
    term sees stop-gradients on the features, so the feature net trains
    only through the hinge and the direction only through the
    inner-product term.
    """
    if not torch.isclose(omega.norm(), torch.ones((), dtype=omega.dtype), atol=1e-5):
        raise LossError("SAN direction must be unit-norm")
    omega_sg = omega.detach()
    f_real = h_real @ omega_sg
    f_fake = h_fake @ omega_sg
    hinge = discriminator_hinge_loss(f_real, f_fake)
    wasserstein = omega @ (h_real.detach().mean(dim=0) - h_fake.detach().mean(dim=0))
    return hinge + wasserstein
