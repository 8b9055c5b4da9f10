"""Shared fixtures: datasets and trained model bundles.

Training is deterministic given (dataset, config, seed), so trained
artifacts are memoized on disk under ``tests/_cache`` keyed by their full
configuration; delete the directory to retrain from scratch.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np
import pytest

from mola.config import DiffusionConfig, VaeConfig, desk_diffusion_config, desk_vae_config
from mola.data import build_dataset
from mola.sampling import InferenceBundle
from mola.skeleton import toy_skeleton
from mola.train_ldm import train_stage2
from mola.train_vae import train_stage1, untrained_val_mpjpe

CACHE_DIR = os.path.join(os.path.dirname(__file__), "_cache")
_SALT = "v1"


def _key(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


def build_trained_bundle(dataset, vae_cfg: VaeConfig, ldm_cfg: DiffusionConfig, seed1: int, seed2: int):
    """Train (or load from cache) a full bundle; returns (bundle, info dict)."""
    key = _key({
        "salt": _SALT,
        "data": {"seed": dataset.seed, "n": len(dataset.train) + len(dataset.val) + len(dataset.test),
                 "skeleton": dataset.skeleton.name},
        "vae": vae_cfg.to_dict(),
        "ldm": ldm_cfg.to_dict(),
        "seeds": [seed1, seed2],
    })
    bundle_dir = os.path.join(CACHE_DIR, key, "bundle")
    info_path = os.path.join(CACHE_DIR, key, "info.json")
    if os.path.exists(info_path):
        with open(info_path, encoding="utf-8") as fh:
            info = json.load(fh)
        return InferenceBundle.load(bundle_dir), info

    import time

    t0 = time.time()
    baseline = untrained_val_mpjpe(dataset, vae_cfg, seed1)
    s1 = train_stage1(dataset, vae_cfg, seed1)
    t1 = time.time()
    s2 = train_stage2(s1, dataset, ldm_cfg, seed2)
    t2 = time.time()
    bundle = InferenceBundle.from_results(s1, s2, out_dir=bundle_dir)
    info = {
        "untrained_mpjpe": baseline,
        "stage1_log": s1.log,
        "stage2_log": s2.log,
        "stage1_seconds": t1 - t0,
        "stage2_seconds": t2 - t1,
        "cond_drop_count": s2.cond_drop_count,
        "cond_sample_count": s2.sample_count,
        "seeds": [seed1, seed2],
    }
    os.makedirs(os.path.dirname(info_path), exist_ok=True)
    with open(info_path, "w", encoding="utf-8") as fh:
        json.dump(info, fh)
    return bundle, info


MICRO_VAE = dict(seq_len=64, width=32, d_w=64, total_iters=120, batch_size=16, adversary="san",
                 eval_every=60, lr_drop_iters=100, checkpoint_every=60, log_every=20)
MICRO_LDM = dict(sample_steps=10, d_model=64, n_blocks=2, n_heads=2, mlp_expand=2, d_cond=32,
                 text_layers=1, total_iters=150, batch_size=16, warmup_iters=20, eval_every=75,
                 checkpoint_every=75, cfg_scale=4.0)

DESK_DATASET = dict(n=1000, seed=123)
DESK_VAE = dict(adversary="san", total_iters=1200, batch_size=32, eval_every=150, lr_drop_iters=900)
DESK_LDM = dict(total_iters=2600, eval_every=200)
DESK_SEEDS = (11, 12)


@pytest.fixture(scope="session")
def toy_dataset():
    return build_dataset(160, seed=21, skeleton=toy_skeleton())


@pytest.fixture(scope="session")
def micro_bundle(toy_dataset):
    bundle, info = build_trained_bundle(
        toy_dataset, VaeConfig(**MICRO_VAE), DiffusionConfig(**MICRO_LDM), seed1=3, seed2=4
    )
    return bundle


@pytest.fixture(scope="session")
def desk_dataset():
    return build_dataset(DESK_DATASET["n"], seed=DESK_DATASET["seed"], skeleton=toy_skeleton())


@pytest.fixture(scope="session")
def desk_artifacts(desk_dataset):
    bundle, info = build_trained_bundle(
        desk_dataset, desk_vae_config(**DESK_VAE), desk_diffusion_config(**DESK_LDM),
        seed1=DESK_SEEDS[0], seed2=DESK_SEEDS[1],
    )
    return bundle, info


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
