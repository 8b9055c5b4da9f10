"""Checkpoint directories for both training stages and serving bundles."""

from __future__ import annotations

import hashlib
import io
import json
import os

import torch

from .config import DiffusionConfig, VaeConfig
from .features import FeatureStats
from .motionfile import atomic_write_json
from .skeleton import SkeletonSpec


class CheckpointError(ValueError):
    pass


def _state_bytes(objects: dict) -> bytes:
    buf = io.BytesIO()
    torch.save(objects, buf)
    return buf.getvalue()


def content_hash(meta: dict, weights: dict) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(meta, sort_keys=True).encode())
    for name in sorted(weights):
        h.update(name.encode())
        for key in sorted(weights[name]):
            t = weights[name][key]
            h.update(key.encode())
            h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()[:16]


def save_stage1(out_dir: str, cfg: VaeConfig, seed: int, skeleton: SkeletonSpec, stats: FeatureStats,
                model_state: dict, disc_state: dict | None, opt_states: dict, iteration: int) -> str:
    os.makedirs(out_dir, exist_ok=True)
    config = {
        "kind": "stage1",
        "config": cfg.to_dict(),
        "seed": seed,
        "skeleton": skeleton.to_dict(),
        "stats": stats.to_dict(),
        "iteration": iteration,
    }
    atomic_write_json(os.path.join(out_dir, "config.json"), config)
    blob = {"model": model_state, "disc": disc_state, "optimizers": opt_states, "iteration": iteration}
    tmp = os.path.join(out_dir, "weights.pt.tmp")
    torch.save(blob, tmp)
    os.replace(tmp, os.path.join(out_dir, "weights.pt"))
    return out_dir


def load_stage1(path: str) -> dict:
    cfg_path = os.path.join(path, "config.json")
    if not os.path.exists(cfg_path):
        raise CheckpointError(f"no stage-1 checkpoint at {path}")
    with open(cfg_path, encoding="utf-8") as fh:
        config = json.load(fh)
    if config.get("kind") != "stage1":
        raise CheckpointError(f"{path} is not a stage-1 checkpoint")
    blob = torch.load(os.path.join(path, "weights.pt"), map_location="cpu", weights_only=False)
    return {
        "config": VaeConfig.from_dict(config["config"]),
        "seed": config["seed"],
        "skeleton": SkeletonSpec.from_dict(config["skeleton"]),
        "stats": FeatureStats.from_dict(config["stats"]),
        "model_state": blob["model"],
        "disc_state": blob["disc"],
        "optimizers": blob["optimizers"],
        "iteration": blob["iteration"],
    }


def save_bundle(
    out_dir: str,
    vae_cfg: VaeConfig,
    ldm_cfg: DiffusionConfig,
    skeleton: SkeletonSpec,
    stats: FeatureStats,
    latent_stats: dict,
    vocab: list[str],
    seeds: dict,
    vae_state: dict,
    denoiser_state: dict,
    text_state: dict,
) -> str:
    """Write a self-contained serving bundle; returns its content id."""
    os.makedirs(out_dir, exist_ok=True)
    meta = {
        "kind": "bundle",
        "vae_config": vae_cfg.to_dict(),
        "ldm_config": ldm_cfg.to_dict(),
        "skeleton": skeleton.to_dict(),
        "stats": stats.to_dict(),
        "latent_stats": latent_stats,
        "vocab": vocab,
        "seeds": seeds,
    }
    weights = {"vae": vae_state, "denoiser": denoiser_state, "text": text_state}
    cid = content_hash(meta, weights)
    meta["id"] = cid
    atomic_write_json(os.path.join(out_dir, "meta.json"), meta)
    tmp = os.path.join(out_dir, "weights.pt.tmp")
    torch.save(weights, tmp)
    os.replace(tmp, os.path.join(out_dir, "weights.pt"))
    return cid


def load_bundle_meta(path: str) -> dict:
    meta_path = os.path.join(path, "meta.json")
    if not os.path.exists(meta_path):
        raise CheckpointError(f"no bundle at {path}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("kind") != "bundle":
        raise CheckpointError(f"{path} is not a serving bundle")
    return meta


def load_bundle_weights(path: str) -> dict:
    return torch.load(os.path.join(path, "weights.pt"), map_location="cpu", weights_only=False)
