"""Stage-1 training: motion VAE with alternating adversarial updates."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
import torch
from torch.optim import AdamW

from .checkpoint import load_stage1, save_stage1
from .config import VaeConfig
from .data import DatasetSplit, make_motion_full
from .features import FeatureStats, recover_global_joints
from .losses import discriminator_hinge_loss, generator_adv_loss, motion_vae_loss, san_discriminator_loss
from .models import Discriminator, VaeModel
from .skeleton import SkeletonSpec


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class Stage1Result:
    model: VaeModel
    discriminator: Discriminator | None
    cfg: VaeConfig
    stats: FeatureStats
    skeleton: SkeletonSpec
    seed: int
    log: list[dict] = field(default_factory=list)
    out_dir: str | None = None


def _prepare_features(dataset: DatasetSplit, cfg: VaeConfig, split: str) -> list[np.ndarray]:
    """Normalized native-length feature matrices for one split."""
    if cfg.encoder_input == "full":
        motions = [make_motion_full(p, dataset.skeleton) for p in dataset.params[split]]
    else:
        motions = dataset.all_splits()[split]
    stats = training_stats(dataset, cfg)
    return [((m.features - stats.mean) / stats.std).astype(np.float32) for m in motions]


def full_stats(dataset: DatasetSplit) -> FeatureStats:
    """Normalization stats for the full-representation ablation input."""
    cached = getattr(dataset, "_full_stats", None)
    if cached is None:
        full = [make_motion_full(p, dataset.skeleton) for p in dataset.params["train"]]
        frames = np.concatenate([m.features for m in full], axis=0)
        cached = FeatureStats.compute(frames, identity_channels=(frames.shape[1] - 1,))
        dataset._full_stats = cached
    return cached


def training_stats(dataset: DatasetSplit, cfg: VaeConfig) -> FeatureStats:
    return full_stats(dataset) if cfg.encoder_input == "full" else dataset.stats


def _window_batch(feats: list[np.ndarray], idx: np.ndarray, L: int, rng: np.random.Generator) -> torch.Tensor:
    """(batch, channels, frames) windows over normalized features.

    Long clips are cropped to a random fully active segment; short ones
    are padded with zeros (in normalized space) and keep activation 0 on
    the padded suffix — the activation channel is normalization-exempt so
    it stays binary.
    """
    dim = feats[0].shape[1]
    out = np.zeros((len(idx), L, dim), dtype=np.float32)
    for row, i in enumerate(idx):
        f = feats[i]
        n = f.shape[0]
        if n > L:
            start = int(rng.integers(0, n - L + 1))
            out[row] = f[start : start + L]
        else:
            out[row, :n] = f
    return torch.from_numpy(out).transpose(1, 2).contiguous()


def _iter_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng((seed, iteration))


def _iter_noise(seed: int, iteration: int, shape: tuple[int, ...]) -> torch.Tensor:
    g = torch.Generator()
    g.manual_seed((seed * 1_000_003 + iteration) % (2**63 - 1))
    return torch.randn(*shape, generator=g)


def _lr_at(cfg: VaeConfig, iteration: int) -> float:
    return cfg.lr if iteration < cfg.lr_drop_iters else cfg.lr_end


def validation_mpjpe(model: VaeModel, feats: list[np.ndarray], lengths: list[int], stats: FeatureStats,
                     skeleton: SkeletonSpec, L: int, max_items: int = 32) -> float:
    """Reconstruction MPJPE (mm) over active frames using posterior means."""
    was_training = model.training
    model.eval()
    errs = []
    rng = np.random.default_rng(0)
    with torch.no_grad():
        for f, n in list(zip(feats, lengths))[:max_items]:
            x = _window_batch([f], np.array([0]), L, rng)
            mean, _ = model.encode(x)
            motion, act, _ = model.decode(mean)
            x_hat = torch.cat([motion, act.unsqueeze(1)], dim=1)
            n_eff = min(n, L)

            def to_joints(t: torch.Tensor) -> np.ndarray:
                raw = t.transpose(1, 2).numpy() * stats.std + stats.mean
                return recover_global_joints(raw[0, :n_eff], skeleton.n_joints)

            errs.append(np.linalg.norm(to_joints(x) - to_joints(x_hat), axis=-1).mean())
    if was_training:
        model.train()
    return float(np.mean(errs) * 1000.0)


def untrained_val_mpjpe(dataset: DatasetSplit, cfg: VaeConfig, seed: int) -> float:
    """Validation MPJPE of a freshly initialized model (the A-criterion baseline)."""
    stats = training_stats(dataset, cfg)
    feats = _prepare_features(dataset, cfg, "val")
    torch.manual_seed(seed)
    model = VaeModel(feats[0].shape[1], cfg)
    model.eval()
    return validation_mpjpe(model, feats, [m.length for m in dataset.val], stats, dataset.skeleton, cfg.seq_len)


def train_stage1(
    dataset: DatasetSplit,
    cfg: VaeConfig,
    seed: int,
    out_dir: str | None = None,
    resume_from: str | None = None,
) -> Stage1Result:
    """Alternate one discriminator maximization step and one VAE step per batch.

    Deterministic given ``seed``: model init, batch order and every noise
    draw are pure functions of (seed, iteration), so resuming from a
    checkpoint replays the exact continuation.
    """
    skeleton = dataset.skeleton
    stats = training_stats(dataset, cfg)
    feats = _prepare_features(dataset, cfg, "train")
    val_feats = _prepare_features(dataset, cfg, "val")
    val_lengths = [m.length for m in dataset.val]
    feature_dim = feats[0].shape[1]
    L = cfg.seq_len

    torch.manual_seed(seed)
    model = VaeModel(feature_dim, cfg)
    disc = None
    if cfg.adversary != "none":
        disc = Discriminator(feature_dim, cfg.width, cfg.d_w, san=cfg.adversary == "san")

    opt_vae = AdamW(model.parameters(), lr=cfg.lr, betas=cfg.betas, weight_decay=cfg.weight_decay)
    opt_disc = AdamW(disc.parameters(), lr=cfg.lr, betas=cfg.betas, weight_decay=cfg.weight_decay) if disc else None

    start_iter = 0
    if resume_from is not None:
        ckpt = load_stage1(resume_from)
        model.load_state_dict(ckpt["model_state"])
        if disc is not None and ckpt["disc_state"] is not None:
            disc.load_state_dict(ckpt["disc_state"])
        opt_vae.load_state_dict(ckpt["optimizers"]["vae"])
        if opt_disc is not None and "disc" in ckpt["optimizers"]:
            opt_disc.load_state_dict(ckpt["optimizers"]["disc"])
        start_iter = ckpt["iteration"]

    mean_t = torch.as_tensor(stats.mean)
    std_t = torch.as_tensor(stats.std)

    def denorm(t: torch.Tensor) -> torch.Tensor:
        return t * std_t[None, :, None] + mean_t[None, :, None]

    log: list[dict] = []

    def checkpoint(iteration: int):
        if out_dir is None:
            return
        save_stage1(
            out_dir, cfg, seed, skeleton, stats,
            model.state_dict(), disc.state_dict() if disc else None,
            {"vae": opt_vae.state_dict(), **({"disc": opt_disc.state_dict()} if opt_disc else {})},
            iteration,
        )
        _write_log(os.path.join(out_dir, "training_log.csv"), log)

    for it in range(start_iter, cfg.total_iters):
        lr = _lr_at(cfg, it)
        for opt in filter(None, (opt_vae, opt_disc)):
            for group in opt.param_groups:
                group["lr"] = lr

        rng = _iter_rng(seed, it)
        idx = rng.integers(0, len(feats), size=cfg.batch_size)
        x = _window_batch(feats, idx, L, rng)
        noise = _iter_noise(seed, it, (cfg.batch_size, cfg.d_z, L // cfg.downsample_ratio))

        row: dict = {"iter": it, "lr": lr}

        if disc is not None:
            with torch.no_grad():
                m_hat, act, _, _, _ = model.reconstruct(x, noise)
                fake = torch.cat([m_hat, act.unsqueeze(1)], dim=1)
            f_real, h_real = disc(denorm(x))
            f_fake, h_fake = disc(denorm(fake))
            if cfg.adversary == "san":
                d_obj = san_discriminator_loss(h_real, h_fake, disc.omega)
            else:
                d_obj = discriminator_hinge_loss(f_real, f_fake)
            opt_disc.zero_grad(set_to_none=True)
            (-d_obj).backward()
            opt_disc.step()
            disc.project_direction()
            row["disc"] = float(d_obj.detach())

        m_hat, act, logits, mean, logvar = model.reconstruct(x, noise)
        loss, comps = motion_vae_loss(x, m_hat, logits, mean, logvar, cfg, stats=stats, n_joints=skeleton.n_joints)
        if disc is not None:
            f_fake, _ = disc(denorm(torch.cat([m_hat, act.unsqueeze(1)], dim=1)))
            adv = generator_adv_loss(f_fake)
            loss = loss + cfg.lambda_adv * adv
            row["adv"] = float(adv.detach())
        opt_vae.zero_grad(set_to_none=True)
        loss.backward()
        opt_vae.step()

        if not torch.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss at iter {it}: {comps}")

        row.update(loss=float(loss.detach()), **comps)
        if it % cfg.eval_every == 0 or it == cfg.total_iters - 1:
            row["val_mpjpe"] = validation_mpjpe(model, val_feats, val_lengths, stats, skeleton, L)
        if it % cfg.log_every == 0 or it == cfg.total_iters - 1 or "val_mpjpe" in row:
            log.append(row)
        if out_dir and (it + 1) % cfg.checkpoint_every == 0:
            checkpoint(it + 1)

    checkpoint(cfg.total_iters)
    model.eval()
    if disc is not None:
        disc.eval()
    return Stage1Result(model, disc, cfg, stats, skeleton, seed, log, out_dir)


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


def load_stage1_model(path: str) -> Stage1Result:
    ckpt = load_stage1(path)
    cfg: VaeConfig = ckpt["config"]
    skeleton: SkeletonSpec = ckpt["skeleton"]
    stats: FeatureStats = ckpt["stats"]
    dim = stats.dim
    model = VaeModel(dim, cfg)
    model.load_state_dict(ckpt["model_state"])
    model.eval()
    disc = None
    if ckpt["disc_state"] is not None:
        disc = Discriminator(dim, cfg.width, cfg.d_w, san=cfg.adversary == "san")
        disc.load_state_dict(ckpt["disc_state"])
        disc.eval()
    return Stage1Result(model, disc, cfg, stats, skeleton, ckpt["seed"], [], path)
