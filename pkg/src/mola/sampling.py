"""End-to-end text-to-motion sampling through a serving bundle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .checkpoint import load_bundle_meta, load_bundle_weights, save_bundle
from .config import DiffusionConfig, VaeConfig
from .features import ENCODER, FULL, FeatureStats, MotionSequence, clip_by_activation
from .models import Denoiser, VaeModel
from .schedule import NoiseSchedule, cfg_epsilon, ddim_step, trailing_timesteps
from .skeleton import SkeletonSpec
from .text import TextEncoder
from .train_ldm import Stage2Result
from .train_vae import Stage1Result


@dataclass
class InferenceBundle:
    """Frozen Stage-1 + Stage-2 models plus everything needed to sample."""

    vae: VaeModel
    denoiser: Denoiser
    text_encoder: TextEncoder
    schedule: NoiseSchedule
    vae_cfg: VaeConfig
    ldm_cfg: DiffusionConfig
    stats: FeatureStats
    latent_mean: torch.Tensor
    latent_std: torch.Tensor
    skeleton: SkeletonSpec
    checkpoint_id: str

    @staticmethod
    def from_results(stage1: Stage1Result, stage2: Stage2Result, out_dir: str | None = None) -> "InferenceBundle":
        checkpoint_id = "unsaved"
        if out_dir is not None:
            checkpoint_id = save_bundle(
                out_dir,
                stage1.cfg,
                stage2.cfg,
                stage1.skeleton,
                stage1.stats,
                {"mean": stage2.latent_mean.tolist(), "std": stage2.latent_std.tolist()},
                stage2.text_encoder.tokenizer.vocab,
                {"stage1": stage1.seed, "stage2": stage2.seed},
                stage1.model.state_dict(),
                stage2.denoiser.state_dict(),
                stage2.text_encoder.state_dict(),
            )
        return InferenceBundle(
            stage1.model, stage2.denoiser, stage2.text_encoder, stage2.schedule,
            stage1.cfg, stage2.cfg, stage1.stats,
            torch.as_tensor(stage2.latent_mean, dtype=torch.float32),
            torch.as_tensor(stage2.latent_std, dtype=torch.float32),
            stage1.skeleton, checkpoint_id,
        )

    @staticmethod
    def load(path: str) -> "InferenceBundle":
        meta = load_bundle_meta(path)
        weights = load_bundle_weights(path)
        vae_cfg = VaeConfig.from_dict(meta["vae_config"])
        ldm_cfg = DiffusionConfig.from_dict(meta["ldm_config"])
        skeleton = SkeletonSpec.from_dict(meta["skeleton"])
        stats = FeatureStats.from_dict(meta["stats"])
        vae = VaeModel(stats.dim, vae_cfg)
        vae.load_state_dict(weights["vae"])
        vae.eval()
        text_encoder = TextEncoder(
            meta["vocab"], d_cond=ldm_cfg.d_cond, n_layers=ldm_cfg.text_layers, max_tokens=ldm_cfg.max_tokens
        )
        text_encoder.load_state_dict(weights["text"])
        text_encoder.eval()
        denoiser = Denoiser(vae_cfg.d_z, vae_cfg.seq_len // vae_cfg.downsample_ratio, ldm_cfg.d_cond,
                            ldm_cfg.d_model, ldm_cfg.n_blocks, ldm_cfg.n_heads, ldm_cfg.mlp_expand)
        denoiser.load_state_dict(weights["denoiser"])
        denoiser.eval()
        return InferenceBundle(
            vae, denoiser, text_encoder, NoiseSchedule.make(ldm_cfg.schedule, ldm_cfg.T),
            vae_cfg, ldm_cfg, stats,
            torch.as_tensor(meta["latent_stats"]["mean"], dtype=torch.float32),
            torch.as_tensor(meta["latent_stats"]["std"], dtype=torch.float32),
            skeleton, meta["id"],
        )

    @property
    def latent_shape(self) -> tuple[int, int]:
        return self.vae_cfg.d_z, self.vae_cfg.seq_len // self.vae_cfg.downsample_ratio

    def predict_eps(self, z: torch.Tensor, t: int, cond: torch.Tensor, null: torch.Tensor, scale: float) -> torch.Tensor:
        """Classifier-free guided noise prediction (conditional and null in one pass)."""
        tt = torch.full((2 * z.shape[0],), t, dtype=torch.long)
        both = self.denoiser(torch.cat([z, z], dim=0), tt, torch.cat([cond, null], dim=0))
        eps_c, eps_u = both.chunk(2, dim=0)
        return cfg_epsilon(eps_c, eps_u, scale)

    def decode_to_features(self, z_std: torch.Tensor) -> torch.Tensor:
        """Standardized latent -> denormalized feature tensor (batch, frames, dim).

        Differentiable: used both for plain decoding and for guidance
        gradients through the frozen decoder.
        """
        z = z_std * self.latent_std[None, :, None] + self.latent_mean[None, :, None]
        feats = self.vae.decoded_features(z).transpose(1, 2)
        mean = torch.as_tensor(self.stats.mean, dtype=feats.dtype)
        std = torch.as_tensor(self.stats.std, dtype=feats.dtype)
        return feats * std + mean

    def features_to_motion(self, feats: torch.Tensor, caption: str | None, delta: float) -> MotionSequence:
        rep = FULL if self.vae_cfg.encoder_input == "full" else ENCODER
        motion = MotionSequence(
            feats.detach().numpy().astype(np.float32), feats.shape[0], rep, self.skeleton, caption
        )
        return clip_by_activation(motion, delta)


def sample_latents(
    bundle: InferenceBundle,
    texts: list[str],
    seeds: list[int],
    cfg_scale: float | None = None,
    steps: int | None = None,
    eta: float | None = None,
) -> torch.Tensor:
    """Run the trailing DDIM chain for a batch of prompts; returns standardized z0."""
    ldm = bundle.ldm_cfg
    scale = ldm.cfg_scale if cfg_scale is None else cfg_scale
    S = ldm.sample_steps if steps is None else steps
    eta = ldm.eta if eta is None else eta
    d_z, d_l = bundle.latent_shape

    gens = [torch.Generator().manual_seed(s) for s in seeds]
    z = torch.stack([torch.randn(d_z, d_l, generator=g) for g in gens])
    with torch.no_grad():
        cond = bundle.text_encoder.encode_texts(texts)
        null = bundle.text_encoder.null(len(texts))
        ts = trailing_timesteps(bundle.schedule.T, S)
        for i, t in enumerate(ts):
            t_prev = ts[i + 1] if i + 1 < len(ts) else 0
            eps = bundle.predict_eps(z, t, cond, null, scale)
            noise = None
            if eta > 0:
                noise = torch.stack([torch.randn(d_z, d_l, generator=g) for g in gens])
            z = ddim_step(z, t, t_prev, eps, bundle.schedule, noise, eta)
    return z


def sample_text_to_motion(
    text: str,
    seed: int,
    bundle: InferenceBundle,
    cfg_scale: float | None = None,
    steps: int | None = None,
    delta: float | None = None,
    eta: float | None = None,
) -> tuple[MotionSequence, dict]:
    """Text -> latent diffusion -> decode -> denormalize -> clip by activation."""
    delta_eff = bundle.ldm_cfg.delta if delta is None else delta
    z0 = sample_latents(bundle, [text], [seed], cfg_scale, steps, eta)
    with torch.no_grad():
        feats = bundle.decode_to_features(z0)[0]
    motion = bundle.features_to_motion(feats, text, delta_eff)
    meta = {
        "seed": seed,
        "s": bundle.ldm_cfg.cfg_scale if cfg_scale is None else cfg_scale,
        "S": bundle.ldm_cfg.sample_steps if steps is None else steps,
        "delta": delta_eff,
        "checkpoint_id": bundle.checkpoint_id,
    }
    return motion, meta


def sample_batch(
    bundle: InferenceBundle,
    texts: list[str],
    seeds: list[int],
    cfg_scale: float | None = None,
    steps: int | None = None,
    delta: float | None = None,
) -> list[MotionSequence]:
    delta_eff = bundle.ldm_cfg.delta if delta is None else delta
    z0 = sample_latents(bundle, texts, seeds, cfg_scale, steps)
    with torch.no_grad():
        feats = bundle.decode_to_features(z0)
    return [bundle.features_to_motion(feats[i], texts[i], delta_eff) for i in range(len(texts))]
