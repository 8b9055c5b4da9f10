"""Stage-2 training: text-conditioned diffusion in the frozen Stage-1 latent space."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch
from torch.optim import AdamW

from .config import DiffusionConfig
from .data import DatasetSplit, caption_vocabulary
from .models import Denoiser, VaeModel
from .motionfile import atomic_write_json
from .schedule import NoiseSchedule
from .text import TextEncoder
from .train_vae import Stage1Result, TrainingDivergedError, _iter_noise, _iter_rng, _prepare_features, _window_batch


@dataclass
class Stage2Result:
    denoiser: Denoiser
    text_encoder: TextEncoder
    cfg: DiffusionConfig
    schedule: NoiseSchedule
    latent_mean: np.ndarray  # (d_z,)
    latent_std: np.ndarray   # (d_z,)
    seed: int
    log: list[dict] = field(default_factory=list)
    cond_drop_count: int = 0
    sample_count: int = 0
    out_dir: str | None = None


def encode_latents(vae: VaeModel, feats: list[np.ndarray], L: int, batch: int = 64,
                   sampled: bool = False, seed: int = 0) -> torch.Tensor:
    """Posterior latents for every motion, padded to L frames first."""
    vae.eval()
    outs = []
    rng = np.random.default_rng(0)
    with torch.no_grad():
        for start in range(0, len(feats), batch):
            chunk = feats[start : start + batch]
            x = _window_batch(chunk, np.arange(len(chunk)), L, rng)
            mean, logvar = vae.encode(x)
            if sampled:
                g = torch.Generator()
                g.manual_seed((seed * 7_919 + start) % (2**63 - 1))
                noise = torch.randn(mean.shape, generator=g)
                outs.append(VaeModel.sample_posterior(mean, logvar, noise))
            else:
                outs.append(mean)
    return torch.cat(outs, dim=0)


def _lr_at(cfg: DiffusionConfig, it: int) -> float:
    if it < cfg.warmup_iters:
        return cfg.lr * (it + 1) / cfg.warmup_iters
    frac = (it - cfg.warmup_iters) / max(1, cfg.total_iters - cfg.warmup_iters)
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * min(1.0, frac)))


def validation_eps_mse(denoiser: Denoiser, text_encoder: TextEncoder, z0: torch.Tensor,
                       captions: list[str], schedule: NoiseSchedule, cfg: DiffusionConfig, seed: int) -> float:
    """Per-element noise-prediction MSE on a fixed (t, noise) validation grid."""
    was_training = denoiser.training
    denoiser.eval()
    text_encoder.eval()
    g = torch.Generator()
    g.manual_seed(seed * 31 + 17)
    rng = np.random.default_rng(seed * 31 + 17)
    total, count = 0.0, 0
    with torch.no_grad():
        cond = text_encoder.encode_texts(captions)
        for _ in range(4):
            t = torch.from_numpy(rng.integers(1, schedule.T + 1, size=len(captions)))
            eps = torch.randn(z0.shape, generator=g)
            ab = torch.from_numpy(schedule.alpha_bars[t.numpy()]).float()[:, None, None]
            z_t = torch.sqrt(ab) * z0 + torch.sqrt(1.0 - ab) * eps
            pred = denoiser(z_t, t, cond)
            total += float(((eps - pred) ** 2).mean()) * z0.numel()
            count += z0.numel()
    if was_training:
        denoiser.train()
        text_encoder.train()
    return total / count


def train_stage2(
    stage1: Stage1Result,
    dataset: DatasetSplit,
    cfg: DiffusionConfig,
    seed: int,
    out_dir: str | None = None,
) -> Stage2Result:
    """Minimize the noise-prediction error with classifier-free condition dropping.

    The Stage-1 VAE stays frozen; training targets are the posterior means
    (or one fixed posterior sample per motion when configured) standardized
    per latent channel.
    """
    vae = stage1.model
    vae_cfg = stage1.cfg
    L = vae_cfg.seq_len
    feats = _prepare_features(dataset, vae_cfg, "train")
    captions = [m.caption for m in dataset.train]
    val_feats = _prepare_features(dataset, vae_cfg, "val")
    val_captions = [m.caption for m in dataset.val]

    z0_all = encode_latents(vae, feats, L, sampled=cfg.use_sampled_z0, seed=seed)
    mu = z0_all.mean(dim=(0, 2))
    sd = z0_all.std(dim=(0, 2)).clamp(min=1e-6)
    z0_all = (z0_all - mu[None, :, None]) / sd[None, :, None]
    z0_val = encode_latents(vae, val_feats, L, sampled=False, seed=seed)
    z0_val = (z0_val - mu[None, :, None]) / sd[None, :, None]

    schedule = NoiseSchedule.make(cfg.schedule, cfg.T)
    d_z, d_l = z0_all.shape[1], z0_all.shape[2]

    torch.manual_seed(seed + 1)
    text_encoder = TextEncoder(
        caption_vocabulary(), d_cond=cfg.d_cond, n_layers=cfg.text_layers, max_tokens=cfg.max_tokens
    )
    denoiser = Denoiser(d_z, d_l, cfg.d_cond, cfg.d_model, cfg.n_blocks, cfg.n_heads, cfg.mlp_expand)
    params = list(denoiser.parameters()) + list(text_encoder.parameters())
    opt = AdamW(params, lr=cfg.lr, weight_decay=1e-4)

    alpha_bars = torch.from_numpy(schedule.alpha_bars).float()
    log: list[dict] = []
    drop_count, sample_count = 0, 0

    def write_out(iteration: int):
        if out_dir is None:
            return
        os.makedirs(out_dir, exist_ok=True)
        atomic_write_json(
            os.path.join(out_dir, "config.json"),
            {"kind": "stage2", "config": cfg.to_dict(), "seed": seed, "iteration": iteration,
             "latent_mean": mu.tolist(), "latent_std": sd.tolist()},
        )
        tmp = os.path.join(out_dir, "weights.pt.tmp")
        torch.save({"denoiser": denoiser.state_dict(), "text": text_encoder.state_dict(),
                    "optimizer": opt.state_dict(), "iteration": iteration}, tmp)
        os.replace(tmp, os.path.join(out_dir, "weights.pt"))
        _write_log(os.path.join(out_dir, "training_log.csv"), log)

    denoiser.train()
    text_encoder.train()
    for it in range(cfg.total_iters):
        lr = _lr_at(cfg, it)
        for group in opt.param_groups:
            group["lr"] = lr

        rng = _iter_rng(seed, it)
        idx = rng.integers(0, z0_all.shape[0], size=cfg.batch_size)
        t_np = rng.integers(1, cfg.T + 1, size=cfg.batch_size)
        drop = rng.random(cfg.batch_size) < cfg.cond_drop_prob
        drop_count += int(drop.sum())
        sample_count += cfg.batch_size

        z0 = z0_all[idx]
        t = torch.from_numpy(t_np)
        eps = _iter_noise(seed, it, z0.shape)
        ab = alpha_bars[t][:, None, None]
        z_t = torch.sqrt(ab) * z0 + torch.sqrt(1.0 - ab) * eps

        cond = text_encoder.encode_texts([captions[i] for i in idx])
        drop_t = torch.from_numpy(drop)
        cond = torch.where(drop_t[:, None], text_encoder.null(cfg.batch_size), cond)

        pred = denoiser(z_t, t, cond)
        per_sample = ((eps - pred) ** 2).reshape(cfg.batch_size, -1).sum(dim=1)
        loss = per_sample.mean()
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()

        if not torch.isfinite(loss):
            raise TrainingDivergedError(f"non-finite diffusion loss at iter {it}")

        row = {"iter": it, "lr": lr, "loss": float(loss.detach()), "mse": float(loss.detach()) / (d_z * d_l)}
        if it % cfg.eval_every == 0 or it == cfg.total_iters - 1:
            row["val_mse"] = validation_eps_mse(denoiser, text_encoder, z0_val, val_captions, schedule, cfg, seed)
        if it % cfg.log_every == 0 or "val_mse" in row:
            log.append(row)
        if out_dir and (it + 1) % cfg.checkpoint_every == 0:
            write_out(it + 1)

    write_out(cfg.total_iters)
    denoiser.eval()
    text_encoder.eval()
    return Stage2Result(
        denoiser, text_encoder, cfg, schedule, mu.numpy(), sd.numpy(), seed, log,
        drop_count, sample_count, out_dir,
    )


def _write_log(path: str, log: list[dict]) -> None:
    if not log:
        return
    keys: list[str] = []
    for row in log:
        for k in row:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(log)
