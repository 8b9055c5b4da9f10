"""Noise schedule and the sampling-step primitives of the latent diffusion model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch


class ScheduleError(ValueError):
    pass


@dataclass
class NoiseSchedule:
    """Per-step alphas and their cumulative products, with alpha_bar[0] = 1."""

    alphas: np.ndarray  # (T+1,), index 0 unused (set to 1)
    alpha_bars: np.ndarray = field(init=False)

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        if self.alphas.ndim != 1 or len(self.alphas) < 2:
            raise ScheduleError("alphas must be a 1-D array of length T+1")
        if not np.all((self.alphas[1:] > 0) & (self.alphas[1:] < 1)):
            raise ScheduleError("per-step alphas must lie in (0, 1)")
        self.alphas[0] = 1.0
        self.alpha_bars = np.cumprod(self.alphas)
        if not np.all(np.diff(self.alpha_bars[1:]) < 0):
            raise ScheduleError("alpha_bar must be strictly decreasing")

    @property
    def T(self) -> int:
        return len(self.alphas) - 1

    def alpha_bar(self, t: int) -> float:
        if not (0 <= t <= self.T):
            raise ScheduleError(f"timestep {t} outside [0, {self.T}]")
        return float(self.alpha_bars[t])

    def sigma(self, t: int, t_prev: int, eta: float = 0.0) -> float:
        """DDIM stochasticity; zero when eta is zero (deterministic sampling)."""
        if eta == 0.0:
            return 0.0
        ab_t, ab_prev = self.alpha_bar(t), self.alpha_bar(t_prev)
        return eta * np.sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * np.sqrt(1.0 - ab_t / ab_prev)

    @staticmethod
    def cosine(T: int = 1000, s: float = 0.008) -> "NoiseSchedule":
        steps = np.arange(T + 1, dtype=np.float64)
        f = np.cos((steps / T + s) / (1.0 + s) * np.pi / 2.0) ** 2
        bars = f / f[0]
        alphas = np.empty(T + 1)
        alphas[0] = 1.0
        alphas[1:] = np.clip(bars[1:] / bars[:-1], 1e-8, 0.9999)
        return NoiseSchedule(alphas)

    @staticmethod
    def linear(T: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02) -> "NoiseSchedule":
        betas = np.linspace(beta_start, beta_end, T)
        alphas = np.empty(T + 1)
        alphas[0] = 1.0
        alphas[1:] = 1.0 - betas
        return NoiseSchedule(alphas)

    @staticmethod
    def make(family: str, T: int) -> "NoiseSchedule":
        if family == "cosine":
            return NoiseSchedule.cosine(T)
        if family == "linear":
            return NoiseSchedule.linear(T)
        raise ScheduleError(f"unknown schedule family {family!r}")


def forward_diffuse(z0: torch.Tensor, t: int, eps: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """Closed-form forward noising: sqrt(ab_t) z0 + sqrt(1 - ab_t) eps."""
    if not (1 <= t <= schedule.T):
        raise ScheduleError(f"timestep {t} outside [1, {schedule.T}]")
    ab = schedule.alpha_bar(t)
    return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps


def tweedie_estimate(z_t: torch.Tensor, t: int, eps_hat: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """One-shot clean-latent estimate from the noise prediction."""
    ab = schedule.alpha_bar(t)
    return (z_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)


def cfg_epsilon(eps_cond: torch.Tensor, eps_uncond: torch.Tensor, scale: float) -> torch.Tensor:
    """Classifier-free guidance combination: s * cond + (1 - s) * uncond."""
    return scale * eps_cond + (1.0 - scale) * eps_uncond


def trailing_timesteps(T: int, S: int) -> list[int]:
    """Uniform-stride step list starting exactly at T: t_k = T - floor(kT/S)."""
    if not (1 <= S <= T):
        raise ScheduleError(f"need 1 <= S <= T, got S={S}, T={T}")
    return [T - (k * T) // S for k in range(S)]


def ddim_recombine(
    z0_est: torch.Tensor,
    eps_hat: torch.Tensor,
    t: int,
    t_prev: int,
    schedule: NoiseSchedule,
    noise: torch.Tensor | None = None,
    eta: float = 0.0,
) -> torch.Tensor:
    """Form z_{t_prev} from a clean-latent estimate and the noise prediction."""
    if not (0 <= t_prev < t <= schedule.T):
        raise ScheduleError(f"need 0 <= t_prev < t <= T, got t={t}, t_prev={t_prev}")
    ab_prev = schedule.alpha_bar(t_prev)
    sigma = schedule.sigma(t, t_prev, eta)
    resid = 1.0 - ab_prev - sigma**2
    if resid < -1e-12:
        raise ScheduleError(f"sigma^2 = {sigma**2:.3g} exceeds 1 - alpha_bar[{t_prev}]")
    out = np.sqrt(ab_prev) * z0_est + np.sqrt(max(resid, 0.0)) * eps_hat
    if sigma > 0.0:
        if noise is None:
            raise ScheduleError("stochastic step (eta > 0) requires noise")
        out = out + sigma * noise
    return out


def ddim_step(
    z_t: torch.Tensor,
    t: int,
    t_prev: int,
    eps_hat: torch.Tensor,
    schedule: NoiseSchedule,
    noise: torch.Tensor | None = None,
    eta: float = 0.0,
) -> torch.Tensor:
    """One DDIM update from level t to level t_prev (t_prev may be 0)."""
    z0 = tweedie_estimate(z_t, t, eps_hat, schedule)
    return ddim_recombine(z0, eps_hat, t, t_prev, schedule, noise, eta)


def renoise(z_prev: torch.Tensor, t_prev: int, t: int, schedule: NoiseSchedule, noise: torch.Tensor) -> torch.Tensor:
    """Time-travel re-noising from level t_prev back up to level t.

    Uses the alpha_bar ratio so it matches the single-step forward kernel
    when t_prev = t - 1 and generalizes to strided step lists.
    """
    if not (0 <= t_prev < t <= schedule.T):
        raise ScheduleError(f"need 0 <= t_prev < t <= T, got t={t}, t_prev={t_prev}")
    ratio = schedule.alpha_bar(t) / schedule.alpha_bar(t_prev)
    return np.sqrt(ratio) * z_prev + np.sqrt(1.0 - ratio) * noise
