"""Training-free guided generation for motion editing.

Guidance minimizes a masked distance between the global joint positions
of the decoded motion and sparse control targets, by stepping the clean
latent estimate along the loss gradient inside the sampling loop, with
optional time-travel repeats (re-noising between repeated updates at the
same timestep).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .features import MotionSequence, recover_global_joints
from .sampling import InferenceBundle
from .schedule import ddim_recombine, renoise, trailing_timesteps, tweedie_estimate
from .skeleton import SkeletonSpec, rest_pose

TASKS = ("path_following", "in_betweening", "upper_body")


class EditSpecError(ValueError):
    pass


@dataclass
class EditSpec:
    """Sparse (joint, frame) position targets with a binary mask."""

    targets: np.ndarray  # (n_joints, frames, 3) meters
    mask: np.ndarray     # (n_joints, frames) in {0, 1}
    task: str
    text: str

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.float64)
        self.mask = np.asarray(self.mask)
        if self.task not in TASKS:
            raise EditSpecError(f"unknown task {self.task!r}")
        if self.targets.ndim != 3 or self.targets.shape[2] != 3:
            raise EditSpecError("targets must be (n_joints, frames, 3)")
        if self.mask.shape != self.targets.shape[:2]:
            raise EditSpecError(
                f"mask shape {self.mask.shape} does not match targets {self.targets.shape[:2]}"
            )
        if not np.isin(self.mask, (0, 1)).all():
            raise EditSpecError("mask must be binary")
        self.mask = self.mask.astype(np.float64)
        if self.mask.sum() == 0:
            raise EditSpecError("mask selects no entries")
        if not np.isfinite(self.targets[self.mask.astype(bool)]).all():
            raise EditSpecError("masked targets must be finite")

    @property
    def n_joints(self) -> int:
        return self.targets.shape[0]

    @property
    def n_frames(self) -> int:
        return self.targets.shape[1]

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "text": self.text,
            "mask": self.mask.astype(int).tolist(),
            "targets": self.targets.tolist(),
        }

    @staticmethod
    def from_dict(d: dict) -> "EditSpec":
        return EditSpec(np.asarray(d["targets"]), np.asarray(d["mask"]), d["task"], d["text"])


@dataclass
class GuidanceConfig:
    """Step size and time-travel policy for guided sampling."""

    rho: float = 0.1
    step_mode: str = "normalized"     # "normalized": rho / sqrt(loss); "constant": literal rho
    time_travel: list[int] | None = None  # per-step repeats; None = rule below
    tail_fraction: float = 0.25       # final fraction of steps that get extra repeats
    tail_repeats: int = 2
    cfg_scale: float | None = None
    steps: int | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.rho < 0:
            raise EditSpecError("rho must be non-negative")
        if self.step_mode not in ("normalized", "constant"):
            raise EditSpecError("step_mode must be normalized or constant")
        if self.time_travel is not None and any(r < 1 for r in self.time_travel):
            raise EditSpecError("time-travel repeats must be >= 1")

    def repeats_for(self, n_steps: int) -> list[int]:
        if self.time_travel is not None:
            if len(self.time_travel) != n_steps:
                raise EditSpecError(f"time_travel must list {n_steps} repeats")
            return list(self.time_travel)
        head = int(np.ceil(n_steps * (1.0 - self.tail_fraction)))
        return [1] * head + [self.tail_repeats] * (n_steps - head)

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "step_mode": self.step_mode,
            "time_travel": self.time_travel,
            "tail_fraction": self.tail_fraction,
            "tail_repeats": self.tail_repeats,
        }

    @staticmethod
    def from_dict(d: dict) -> "GuidanceConfig":
        return GuidanceConfig(
            rho=d.get("rho", 0.1),
            step_mode=d.get("step_mode", "normalized"),
            time_travel=d.get("time_travel"),
            tail_fraction=d.get("tail_fraction", 0.25),
            tail_repeats=d.get("tail_repeats", 2),
            cfg_scale=d.get("cfg_scale"),
            steps=d.get("steps"),
            delta=d.get("delta"),
        )


def _safe_norm(sq: torch.Tensor) -> torch.Tensor:
    """sqrt with a zero (sub)gradient at exactly zero, matching plain sqrt elsewhere."""
    positive = (sq > 0).to(sq.dtype)
    return torch.sqrt(torch.clamp(sq, min=1e-24)) * positive


def editing_loss(motion_features: torch.Tensor, spec: EditSpec) -> torch.Tensor:
    """Sum over masked (joint, frame) entries of the Euclidean position error.

    ``motion_features`` are denormalized encoder-representation features,
    (frames, dim) for one motion or (batch, frames, dim); returns a scalar
    or a (batch,) tensor accordingly.  Differentiable with respect to the
    features; the gradient is zero at an exact match.
    """
    single = motion_features.dim() == 2
    feats = motion_features.unsqueeze(0) if single else motion_features
    joints = recover_global_joints(feats, spec.n_joints)
    if joints.shape[1] != spec.n_frames:
        raise EditSpecError(f"spec covers {spec.n_frames} frames, motion has {joints.shape[1]}")
    targets = torch.as_tensor(spec.targets, dtype=feats.dtype).transpose(0, 1)  # (frames, joints, 3)
    mask = torch.as_tensor(spec.mask, dtype=feats.dtype).transpose(0, 1)
    sq = ((joints - targets) ** 2).sum(dim=-1)
    loss = (_safe_norm(sq) * mask).sum(dim=(1, 2))
    return loss[0] if single else loss


def editing_gradient(
    z0_est: torch.Tensor,
    spec: EditSpec,
    decode_features,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Gradient of the editing loss at the clean-latent estimate.

    ``decode_features`` maps a (batch, d_z, d_l) latent to denormalized
    features (batch, frames, dim) through the frozen decoder.  Returns
    (gradient like z0_est, per-sample loss values).
    """
    z = z0_est.detach().requires_grad_(True)
    losses = editing_loss(decode_features(z), spec)
    total = losses.sum() if losses.dim() > 0 else losses
    (grad,) = torch.autograd.grad(total, z)
    if not torch.isfinite(grad).all():
        raise FloatingPointError("editing guidance produced a non-finite gradient")
    return grad, losses.detach()


def _step_sizes(gcfg: GuidanceConfig, losses: torch.Tensor) -> torch.Tensor:
    if gcfg.step_mode == "constant":
        return torch.full_like(losses, gcfg.rho)
    return gcfg.rho / torch.sqrt(losses + 1e-8)


def mpgd_update(
    z_prev: torch.Tensor,
    z0_est: torch.Tensor,
    spec: EditSpec,
    rho_t: float,
    schedule,
    t_prev: int,
    decode_features,
) -> torch.Tensor:
    """Move the denoised sample along the editing-loss gradient at z_{0|t}.

    Implements the post-denoising update ``z_prev - rho_t * sqrt(ab_prev) *
    grad`` with the gradient taken through the frozen decoder and the
    joint-recovery map.
    """
    if rho_t == 0.0:
        return z_prev
    grad, _ = editing_gradient(z0_est, spec, decode_features)
    return z_prev - rho_t * np.sqrt(schedule.alpha_bar(t_prev)) * grad


def guided_sample(
    spec: EditSpec,
    seed: int,
    gcfg: GuidanceConfig,
    bundle: InferenceBundle,
) -> tuple[MotionSequence, dict]:
    """Guided generation: per trailing step, repeat {estimate clean latent,
    gradient-step it, recombine}, re-noising between repeats (time travel)."""
    motions, info = guided_sample_batch([spec], [seed], gcfg, bundle)
    return motions[0], info


def guided_sample_batch(
    specs: list[EditSpec],
    seeds: list[int],
    gcfg: GuidanceConfig,
    bundle: InferenceBundle,
) -> tuple[list[MotionSequence], dict]:
    if len(specs) != len(seeds):
        raise EditSpecError("one seed per spec required")
    ldm = bundle.ldm_cfg
    scale = ldm.cfg_scale if gcfg.cfg_scale is None else gcfg.cfg_scale
    S = ldm.sample_steps if gcfg.steps is None else gcfg.steps
    delta = ldm.delta if gcfg.delta is None else gcfg.delta
    eta = ldm.eta
    d_z, d_l = bundle.latent_shape
    n = len(specs)
    L = bundle.vae_cfg.seq_len
    for spec in specs:
        if spec.n_frames != L:
            raise EditSpecError(f"spec frame grid {spec.n_frames} must match model length {L}")
        if spec.n_joints != bundle.skeleton.n_joints:
            raise EditSpecError("spec joint count does not match the skeleton")

    same_spec = all(s is specs[0] for s in specs) or all(
        np.array_equal(s.targets, specs[0].targets) and np.array_equal(s.mask, specs[0].mask) for s in specs
    )

    gens = [torch.Generator().manual_seed(s) for s in seeds]
    z = torch.stack([torch.randn(d_z, d_l, generator=g) for g in gens])
    with torch.no_grad():
        cond = bundle.text_encoder.encode_texts([s.text for s in specs])
        null = bundle.text_encoder.null(n)

    ts = trailing_timesteps(bundle.schedule.T, S)
    repeats = gcfg.repeats_for(len(ts))
    grad_evals = [0] * len(ts)
    loss_trace: list[float] = []

    for i, t in enumerate(ts):
        t_prev = ts[i + 1] if i + 1 < len(ts) else 0
        for rep in range(repeats[i], 0, -1):
            with torch.no_grad():
                eps = bundle.predict_eps(z, t, cond, null, scale)
                z0 = tweedie_estimate(z, t, eps, bundle.schedule)
            if gcfg.rho > 0:
                if same_spec:
                    grad, losses = editing_gradient(z0, specs[0], bundle.decode_to_features)
                else:
                    grads, loss_list = [], []
                    for j, s in enumerate(specs):
                        gj, lj = editing_gradient(z0[j : j + 1], s, bundle.decode_to_features)
                        grads.append(gj)
                        loss_list.append(lj.reshape(1))
                    grad = torch.cat(grads, dim=0)
                    losses = torch.cat(loss_list, dim=0)
                rho_t = _step_sizes(gcfg, losses.reshape(n))
                z0 = z0 - rho_t[:, None, None] * grad
                grad_evals[i] += 1
                loss_trace.append(float(losses.reshape(n).mean()))
            with torch.no_grad():
                noise = None
                if eta > 0:
                    noise = torch.stack([torch.randn(d_z, d_l, generator=g) for g in gens])
                z_prev_level = ddim_recombine(z0, eps, t, t_prev, bundle.schedule, noise, eta)
                if rep > 1:
                    travel = torch.stack([torch.randn(d_z, d_l, generator=g) for g in gens])
                    z = renoise(z_prev_level, t_prev, t, bundle.schedule, travel)
                else:
                    z = z_prev_level

    with torch.no_grad():
        feats = bundle.decode_to_features(z)
    motions = [bundle.features_to_motion(feats[i], specs[i].text, delta) for i in range(n)]
    info = {
        "gradient_evals": grad_evals,
        "loss_trace": loss_trace,
        "seeds": list(seeds),
        "checkpoint_id": bundle.checkpoint_id,
        "guidance": gcfg.to_dict(),
        "s": scale,
        "S": S,
        "delta": delta,
    }
    return motions, info


def path_from_motion(motion: MotionSequence, total_frames: int) -> np.ndarray:
    """Ground-plane pelvis trajectory of a motion, padded to the frame grid.

    Frames beyond the motion's length repeat the final position, so the
    resulting path always covers ``total_frames`` entries.
    """
    joints = recover_global_joints(motion.features[: motion.length], motion.skeleton.n_joints)
    xz = joints[:, 0][:, [0, 2]]
    if len(xz) >= total_frames:
        return xz[:total_frames]
    pad = np.repeat(xz[-1:], total_frames - len(xz), axis=0)
    return np.concatenate([xz, pad], axis=0)


def resample_polyline(points: np.ndarray, n: int) -> np.ndarray:
    """Resample a 2-D polyline to n points uniformly spaced by arc length."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise EditSpecError("polyline needs at least 2 (x, z) points")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = seg.sum()
    if total <= 0:
        raise EditSpecError("polyline has zero length")
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, total, n)
    x = np.interp(targets, cum, pts[:, 0])
    z = np.interp(targets, cum, pts[:, 1])
    return np.stack([x, z], axis=-1)


def build_path_following_spec(
    path_xz: np.ndarray,
    text: str,
    skeleton: SkeletonSpec,
    pelvis_height: float | None = None,
) -> EditSpec:
    """Pelvis-trajectory control: masks the root joint on every frame of the grid."""
    path = np.asarray(path_xz, dtype=np.float64)
    if path.ndim != 2 or path.shape[1] != 2 or path.shape[0] < 2:
        raise EditSpecError("path must be (frames, 2) with at least 2 points")
    L = path.shape[0]
    h = rest_pose(skeleton)[0, 1] if pelvis_height is None else pelvis_height
    targets = np.zeros((skeleton.n_joints, L, 3))
    mask = np.zeros((skeleton.n_joints, L))
    targets[0, :, 0] = path[:, 0]
    targets[0, :, 1] = h
    targets[0, :, 2] = path[:, 1]
    mask[0, :] = 1
    return EditSpec(targets, mask, "path_following", text)


def build_inbetweening_spec(
    start_pose: np.ndarray,
    end_pose: np.ndarray,
    n_ctx: int,
    text: str,
    total_frames: int,
) -> EditSpec:
    """Boundary-frame control: all joints pinned on the first/last n_ctx frames."""
    start = np.asarray(start_pose, dtype=np.float64)
    end = np.asarray(end_pose, dtype=np.float64)
    if start.ndim != 2 or start.shape[1] != 3 or start.shape != end.shape:
        raise EditSpecError("poses must be matching (n_joints, 3) arrays")
    if n_ctx < 1 or 2 * n_ctx >= total_frames:
        raise EditSpecError("need 1 <= n_ctx and 2*n_ctx < total frames")
    nj = start.shape[0]
    targets = np.zeros((nj, total_frames, 3))
    mask = np.zeros((nj, total_frames))
    targets[:, :n_ctx] = start[:, None, :]
    targets[:, total_frames - n_ctx :] = end[:, None, :]
    mask[:, :n_ctx] = 1
    mask[:, total_frames - n_ctx :] = 1
    return EditSpec(targets, mask, "in_betweening", text)


def build_upper_body_spec(
    lower_body_motion: MotionSequence,
    text: str,
    total_frames: int | None = None,
) -> EditSpec:
    """Lower-body lock: pins the tagged lower-body joints to the given motion."""
    skeleton = lower_body_motion.skeleton
    lower = skeleton.require_lower_body()
    L = total_frames or lower_body_motion.n_frames
    active = min(lower_body_motion.length, L)
    joints = recover_global_joints(lower_body_motion.features[:active], skeleton.n_joints)
    targets = np.zeros((skeleton.n_joints, L, 3))
    mask = np.zeros((skeleton.n_joints, L))
    for j in lower:
        targets[j, :active] = joints[:, j]
        mask[j, :active] = 1
    return EditSpec(targets, mask, "upper_body", text)
