"""Convolutional motion VAE and its discriminator.

Encoder and decoder are 1-D CNNs over the frame axis: a conv stem, two
stride-2 downsampling stages with residual blocks (temporal ratio 4), and
a mirrored decoder using nearest-neighbor upsampling.  The decoder output
splits into the motion channels and a scalar activation logit per frame.
The discriminator shares the stem topology and ends in a global average
pool followed by a single linear direction, which is what the sliced
adversarial variant normalizes.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..config import VaeConfig


class ResBlock1d(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv1d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv1d(channels, channels, 3, padding=1)

    def forward(self, x):
        h = F.leaky_relu(self.conv1(x), 0.2)
        h = self.conv2(h)
        return F.leaky_relu(x + h, 0.2)


class Encoder(nn.Module):
    def __init__(self, in_dim: int, d_z: int, width: int):
        super().__init__()
        self.stem = nn.Conv1d(in_dim, width, 3, padding=1)
        self.down1 = nn.Conv1d(width, width, 4, stride=2, padding=1)
        self.res1 = ResBlock1d(width)
        self.down2 = nn.Conv1d(width, width, 4, stride=2, padding=1)
        self.res2 = ResBlock1d(width)
        self.res3 = ResBlock1d(width)
        self.head = nn.Conv1d(width, 2 * d_z, 3, padding=1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h = F.leaky_relu(self.stem(x), 0.2)
        h = self.res1(F.leaky_relu(self.down1(h), 0.2))
        h = self.res2(F.leaky_relu(self.down2(h), 0.2))
        h = self.res3(h)
        mean, logvar = self.head(h).chunk(2, dim=1)
        return mean, logvar


class Decoder(nn.Module):
    """Mirror of the encoder; the activation head is structurally monotone.

    Activation logits are a learnable base minus a cumulative softplus, so
    every decoded activation is non-increasing over frames and crosses any
    threshold at most once — padding is a suffix by construction, and the
    step targets remain exactly representable.
    """

    def __init__(self, out_dim: int, d_z: int, width: int):
        super().__init__()
        self.stem = nn.Conv1d(d_z, width, 3, padding=1)
        self.res1 = ResBlock1d(width)
        self.up1 = nn.Conv1d(width, width, 3, padding=1)
        self.res2 = ResBlock1d(width)
        self.up2 = nn.Conv1d(width, width, 3, padding=1)
        self.res3 = ResBlock1d(width)
        self.head = nn.Conv1d(width, out_dim, 3, padding=1)
        self.act_base = nn.Parameter(torch.tensor(4.0))

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        h = self.res1(F.leaky_relu(self.stem(z), 0.2))
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = self.res2(F.leaky_relu(self.up1(h), 0.2))
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = self.res3(F.leaky_relu(self.up2(h), 0.2))
        out = self.head(h)
        act_logits = self.act_base - torch.cumsum(F.softplus(out[:, -1:]), dim=-1)
        return torch.cat([out[:, :-1], act_logits], dim=1)


class Discriminator(nn.Module):
    """Feature net h followed by one linear direction; SAN normalizes it."""

    def __init__(self, in_dim: int, width: int, d_w: int, san: bool):
        super().__init__()
        self.san = san
        self.stem = nn.Conv1d(in_dim, width, 4, stride=2, padding=1)
        self.conv2 = nn.Conv1d(width, width, 4, stride=2, padding=1)
        self.res = ResBlock1d(width)
        self.proj = nn.Conv1d(width, d_w, 3, padding=1)
        self.direction = nn.Parameter(torch.randn(d_w) / np.sqrt(d_w))
        self.bias = nn.Parameter(torch.zeros(())) if not san else None

    def features(self, x: torch.Tensor) -> torch.Tensor:
        h = F.leaky_relu(self.stem(x), 0.2)
        h = self.res(F.leaky_relu(self.conv2(h), 0.2))
        h = self.proj(h)
        return h.mean(dim=-1)

    @property
    def omega(self) -> torch.Tensor:
        return self.direction / self.direction.norm().clamp(min=1e-12)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h = self.features(x)
        if self.san:
            f = h @ self.omega
        else:
            f = h @ self.direction + self.bias
        return f, h

    @torch.no_grad()
    def project_direction(self) -> None:
        """Re-project the SAN direction to the unit sphere after an optimizer step."""
        if self.san:
            self.direction.div_(self.direction.norm().clamp(min=1e-12))


class VaeModel(nn.Module):
    """Encoder/decoder pair operating on (batch, channels, frames) tensors."""

    def __init__(self, feature_dim: int, cfg: VaeConfig):
        super().__init__()
        self.feature_dim = feature_dim
        self.cfg = cfg
        self.encoder = Encoder(feature_dim, cfg.d_z, cfg.width)
        self.decoder = Decoder(feature_dim, cfg.d_z, cfg.width)

    def encode(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if x.shape[1] != self.feature_dim:
            raise ValueError(f"expected {self.feature_dim} channels, got {x.shape[1]}")
        return self.encoder(x)

    @staticmethod
    def sample_posterior(mean: torch.Tensor, logvar: torch.Tensor, noise: torch.Tensor) -> torch.Tensor:
        if noise.shape != mean.shape:
            raise ValueError("posterior noise must match the mean shape")
        return mean + torch.exp(0.5 * logvar) * noise

    def decode(self, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Returns (motion channels, activation in (0,1), activation logits)."""
        out = self.decoder(z)
        motion, logits = out[:, :-1], out[:, -1]
        return motion, torch.sigmoid(logits), logits

    def reconstruct(self, x: torch.Tensor, noise: torch.Tensor | None = None) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        mean, logvar = self.encode(x)
        z = mean if noise is None else self.sample_posterior(mean, logvar, noise)
        motion, act, logits = self.decode(z)
        return motion, act, logits, mean, logvar

    def decoded_features(self, z: torch.Tensor) -> torch.Tensor:
        """Decoder output reassembled as (batch, channels, frames) with activation."""
        motion, act, _ = self.decode(z)
        return torch.cat([motion, act.unsqueeze(1)], dim=1)
