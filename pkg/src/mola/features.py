"""Motion feature representation and the differentiable feature-to-joints map.

A frame of the full representation stacks, in order: root angular velocity
about Y (rad/frame), root linear velocity on XZ (m/frame, heading-local),
root height (m), heading-local joint positions (3 per joint), joint
rotations as 6D (first two rotation-matrix columns, per joint), global
joint velocities (3 per joint), four binary foot contacts, and a scalar
activation in [0, 1].  The encoder representation drops joint velocities
and contacts.  Activation is 1 on frames that carry motion and 0 on
padding, which is how generated length is inferred at inference time.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import torch

from .skeleton import SkeletonSpec

FOOT_CONTACT_THRESH = 0.002  # m/frame, scaled to the toy skeletons

ENCODER = "encoder"
FULL = "full"


class InvalidMotionError(ValueError):
    """Raised on malformed motion inputs (shape, length or value errors)."""


def encoder_dim(n_joints: int) -> int:
    return 4 + 9 * n_joints + 1


def full_dim(n_joints: int) -> int:
    return 4 + 12 * n_joints + 4 + 1


def representation_of(dim: int, n_joints: int) -> str:
    if dim == encoder_dim(n_joints):
        return ENCODER
    if dim == full_dim(n_joints):
        return FULL
    raise InvalidMotionError(f"feature dim {dim} matches neither representation for {n_joints} joints")


@dataclass
class MotionSequence:
    """A (frames x channels) feature matrix plus its active length."""

    features: np.ndarray
    length: int
    representation: str
    skeleton: SkeletonSpec
    caption: str | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        if self.features.ndim != 2:
            raise InvalidMotionError("features must be (frames, channels)")
        expected = encoder_dim(self.skeleton.n_joints) if self.representation == ENCODER else full_dim(self.skeleton.n_joints)
        if self.representation not in (ENCODER, FULL):
            raise InvalidMotionError(f"unknown representation {self.representation!r}")
        if self.features.shape[1] != expected:
            raise InvalidMotionError(
                f"{self.representation} features must have {expected} channels, got {self.features.shape[1]}"
            )
        if not (0 < self.length <= self.features.shape[0]):
            raise InvalidMotionError(f"length {self.length} out of range for {self.features.shape[0]} frames")
        if not np.isfinite(self.features).all():
            raise InvalidMotionError("features contain non-finite values")

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]

    @property
    def activation(self) -> np.ndarray:
        return self.features[:, -1]

    def copy(self) -> "MotionSequence":
        return replace(self, features=self.features.copy())


def _heading_angles(global_joints: np.ndarray, skeleton: SkeletonSpec) -> np.ndarray:
    """Per-frame facing angle about Y, unwrapped.

    "across" mode reads the left-right pair (spans +X at zero heading);
    "feet_forward" sums the heel-to-toe vectors of both feet (spans +Z),
    which stays stable on skeletons whose only lateral pair is the feet.
    """
    if skeleton.heading_mode == "feet_forward" and skeleton.foot_joints is not None:
        lh, lt, rh, rt = skeleton.foot_joints
        fwd = (global_joints[:, lt] - global_joints[:, lh]) + (global_joints[:, rt] - global_joints[:, rh])
        theta = np.arctan2(fwd[:, 0], fwd[:, 2])
        return np.unwrap(theta)
    if skeleton.heading_pair is None:
        return np.zeros(global_joints.shape[0])
    li, ri = skeleton.heading_pair
    across = global_joints[:, li] - global_joints[:, ri]
    theta = np.arctan2(-across[:, 2], across[:, 0])
    return np.unwrap(theta)


def _rot_y(theta: np.ndarray) -> np.ndarray:
    """Rotation matrices about +Y; theta (...,) -> (..., 3, 3)."""
    c, s = np.cos(theta), np.sin(theta)
    zeros, ones = np.zeros_like(c), np.ones_like(c)
    rows = np.stack(
        [c, zeros, s, zeros, ones, zeros, -s, zeros, c], axis=-1
    )
    return rows.reshape(theta.shape + (3, 3))


def _shortest_arc(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation matrices mapping direction a to direction b, vectorized over leading dims."""
    an = np.linalg.norm(a, axis=-1, keepdims=True)
    bn = np.linalg.norm(b, axis=-1, keepdims=True)
    eye = np.broadcast_to(np.eye(3), a.shape[:-1] + (3, 3)).copy()
    ok = (an[..., 0] > 1e-9) & (bn[..., 0] > 1e-9)
    u = np.where(an > 1e-9, a / np.maximum(an, 1e-9), 0.0)
    v = np.where(bn > 1e-9, b / np.maximum(bn, 1e-9), 0.0)
    w = np.cross(u, v)
    c = np.sum(u * v, axis=-1)
    s2 = np.sum(w * w, axis=-1)
    # Rodrigues with the (1-c)/s^2 form; fall back to identity / flip rotation at the poles.
    kx, ky, kz = w[..., 0], w[..., 1], w[..., 2]
    zeros = np.zeros_like(kx)
    K = np.stack([zeros, -kz, ky, kz, zeros, -kx, -ky, kx, zeros], axis=-1).reshape(w.shape[:-1] + (3, 3))
    factor = np.where(s2 > 1e-12, (1.0 - c) / np.maximum(s2, 1e-12), 0.0)
    R = eye + K + factor[..., None, None] * (K @ K)
    # Antiparallel: rotate by pi about an axis perpendicular to u.
    anti = ok & (s2 <= 1e-12) & (c < 0)
    if np.any(anti):
        ua = u[anti]
        perp = np.cross(ua, np.where(np.abs(ua[:, :1]) < 0.9, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]))
        perp /= np.linalg.norm(perp, axis=-1, keepdims=True)
        px, py, pz = perp[:, 0], perp[:, 1], perp[:, 2]
        flip = np.empty((len(ua), 3, 3))
        for i in range(len(ua)):
            p = np.array([px[i], py[i], pz[i]])
            flip[i] = 2.0 * np.outer(p, p) - np.eye(3)
        R[anti] = flip
    R[~ok] = np.eye(3)
    return R


def build_full_pose_features(global_joints: np.ndarray, skeleton: SkeletonSpec) -> MotionSequence:
    """Extract the full feature representation from global joint positions.

    Velocities are forward differences (last frame repeats the previous
    one), headings come from the skeleton's across pair, and the clip is
    re-expressed relative to its first frame's ground position and facing
    so that :func:`recover_global_joints` is an exact inverse for clips
    that start at the origin facing forward.
    """
    G = np.asarray(global_joints, dtype=np.float64)
    if G.ndim != 3 or G.shape[1] != skeleton.n_joints or G.shape[2] != 3:
        raise InvalidMotionError(f"global joints must be (frames, {skeleton.n_joints}, 3)")
    L = G.shape[0]
    if L < 2:
        raise InvalidMotionError("need at least 2 frames to build features")

    theta0 = _heading_angles(G, skeleton)[0]
    root0 = G[0, 0].copy()
    root0[1] = 0.0
    G = (G - root0) @ _rot_y(-theta0).T  # row vectors: p' = R_y(-theta0) @ p

    theta = _heading_angles(G, skeleton)
    nj = skeleton.n_joints

    angvel = np.empty(L)
    angvel[:-1] = np.diff(theta)
    angvel[-1] = angvel[-2]

    root = G[:, 0]
    dpos = np.empty((L, 3))
    dpos[:-1] = np.diff(root, axis=0)
    dpos[-1] = dpos[-2]
    inv_rot = _rot_y(-theta)  # (L, 3, 3)
    v_local = np.einsum("lij,lj->li", inv_rot, dpos)

    ground_root = root.copy()
    ground_root[:, 1] = 0.0
    local = np.einsum("lij,lkj->lki", inv_rot, G - ground_root[:, None, :])

    # Per-joint rotation: shortest arc from the rest bone offset to the current
    # bone vector, both in the heading-local frame; root gets the identity.
    bone_cur = np.zeros_like(local)
    rest = skeleton.bone_offsets
    for j in range(1, nj):
        bone_cur[:, j] = local[:, j] - local[:, skeleton.parent_index[j]]
    rot = np.broadcast_to(np.eye(3), (L, nj, 3, 3)).copy()
    rot[:, 1:] = _shortest_arc(np.broadcast_to(rest[1:], (L, nj - 1, 3)), bone_cur[:, 1:])
    rot6d = rot[..., :, :2].transpose(0, 1, 3, 2).reshape(L, nj * 6)  # columns 0 and 1, column-major

    jvel = np.empty((L, nj, 3))
    jvel[:-1] = np.diff(G, axis=0)
    jvel[-1] = jvel[-2]

    contacts = compute_foot_contacts(G, skeleton, FOOT_CONTACT_THRESH)

    feats = np.concatenate(
        [
            angvel[:, None],
            v_local[:, [0, 2]],
            root[:, 1:2],
            local.reshape(L, nj * 3),
            rot6d,
            jvel.reshape(L, nj * 3),
            contacts.astype(np.float64),
            np.ones((L, 1)),
        ],
        axis=1,
    )
    return MotionSequence(feats.astype(np.float32), L, FULL, skeleton)


def to_encoder_features(full: MotionSequence) -> MotionSequence:
    """Drop joint velocities and contacts, keeping the activation channel."""
    if full.representation != FULL:
        raise InvalidMotionError("to_encoder_features expects the full representation")
    nj = full.skeleton.n_joints
    head = 4 + 9 * nj
    feats = np.concatenate([full.features[:, :head], full.features[:, -1:]], axis=1)
    return MotionSequence(feats, full.length, ENCODER, full.skeleton, full.caption)


def pad_and_activate(motion: MotionSequence, target_frames: int) -> MotionSequence:
    """Zero-pad to ``target_frames`` and write the binary activation channel."""
    if motion.length > target_frames:
        raise InvalidMotionError(f"cannot pad length {motion.length} into {target_frames} frames")
    feats = np.zeros((target_frames, motion.features.shape[1]), dtype=np.float32)
    feats[: motion.length] = motion.features[: motion.length]
    feats[:, -1] = 0.0
    feats[: motion.length, -1] = 1.0
    return MotionSequence(feats, motion.length, motion.representation, motion.skeleton, motion.caption)


def clip_by_activation(decoded: MotionSequence, delta: float = 0.5) -> MotionSequence:
    """Truncate at the first frame whose activation falls below ``delta``.

    Padding is a suffix by construction, so the first crossing marks the
    end of content.  At least one frame is always kept so downstream code
    never sees an empty motion.
    """
    if not (0.0 < delta < 1.0):
        raise InvalidMotionError("delta must lie in (0, 1)")
    a = decoded.activation
    below = np.nonzero(a < delta)[0]
    length = int(below[0]) if below.size else decoded.n_frames
    length = max(1, length)
    feats = decoded.features[:length]
    return MotionSequence(feats, length, decoded.representation, decoded.skeleton, decoded.caption)


def compute_foot_contacts(global_joints: np.ndarray, skeleton: SkeletonSpec, v_thresh: float = FOOT_CONTACT_THRESH) -> np.ndarray:
    """Binary (frames, 4) contacts: 1 where a foot joint moves slower than v_thresh."""
    feet = skeleton.require_feet()
    G = np.asarray(global_joints, dtype=np.float64)
    fp = G[:, list(feet)]
    speed = np.empty((G.shape[0], 4))
    speed[:-1] = np.linalg.norm(np.diff(fp, axis=0), axis=-1)
    speed[-1] = speed[-2]
    return (speed < v_thresh).astype(np.float32)


def recover_global_joints(features, n_joints: int):
    """Differentiable map from features to global joint positions.

    Accepts a numpy array or torch tensor shaped ``(..., frames, dim)`` in
    either representation and returns ``(..., frames, n_joints, 3)`` of the
    same kind.  Root XZ comes from integrating the heading-rotated linear
    velocities, heading from integrating the angular velocity, root height
    from its own channel, and the remaining joints from the heading-local
    positions.  Integration starts at the origin facing forward.
    """
    if isinstance(features, np.ndarray):
        t = torch.from_numpy(np.ascontiguousarray(features))
        with torch.no_grad():
            out = recover_global_joints(t, n_joints)
        return out.numpy()

    x = features
    if x.shape[-1] not in (encoder_dim(n_joints), full_dim(n_joints)):
        raise InvalidMotionError(f"feature dim {x.shape[-1]} invalid for {n_joints} joints")
    L = x.shape[-2]
    angvel = x[..., 0]
    vx, vz = x[..., 1], x[..., 2]
    ry = x[..., 3]
    local = x[..., 4 : 4 + 3 * n_joints].reshape(x.shape[:-1] + (n_joints, 3))

    zero = torch.zeros_like(angvel[..., :1])
    theta = torch.cat([zero, torch.cumsum(angvel[..., : L - 1], dim=-1)], dim=-1)
    c, s = torch.cos(theta), torch.sin(theta)

    wx = c * vx + s * vz
    wz = -s * vx + c * vz
    root_x = torch.cat([zero, torch.cumsum(wx[..., : L - 1], dim=-1)], dim=-1)
    root_z = torch.cat([zero, torch.cumsum(wz[..., : L - 1], dim=-1)], dim=-1)

    lx, ly, lz = local[..., 0], local[..., 1], local[..., 2]
    cj, sj = c.unsqueeze(-1), s.unsqueeze(-1)
    gx = cj * lx + sj * lz + root_x.unsqueeze(-1)
    gy = ly
    gz = -sj * lx + cj * lz + root_z.unsqueeze(-1)
    joints = torch.stack([gx, gy, gz], dim=-1)

    root = torch.stack([root_x, ry, root_z], dim=-1)
    joints = torch.cat([root.unsqueeze(-2), joints[..., 1:, :]], dim=-2)
    return joints


@dataclass
class FeatureStats:
    """Per-channel mean/std used to normalize features before the models."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float32)
        self.std = np.asarray(self.std, dtype=np.float32)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise InvalidMotionError("stats mean/std must be matching 1-D arrays")
        if (self.std <= 0).any():
            raise InvalidMotionError("stats std must be positive")

    @staticmethod
    def compute(frames: np.ndarray, identity_channels: tuple[int, ...] = ()) -> "FeatureStats":
        """Stats over a (n, dim) stack of frames; std floored at 1e-6.

        ``identity_channels`` are left untouched by normalization (mean 0,
        std 1) — used for the binary activation channel.
        """
        frames = np.asarray(frames, dtype=np.float64)
        mean = frames.mean(axis=0)
        std = np.maximum(frames.std(axis=0), 1e-6)
        for ch in identity_channels:
            mean[ch] = 0.0
            std[ch] = 1.0
        return FeatureStats(mean, std)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "FeatureStats":
        return FeatureStats(np.asarray(d["mean"]), np.asarray(d["std"]))


def _check_stats(motion: MotionSequence, stats: FeatureStats):
    if motion.features.shape[1] != stats.dim:
        raise InvalidMotionError(f"stats dim {stats.dim} != feature dim {motion.features.shape[1]}")


def normalize(motion: MotionSequence, stats: FeatureStats) -> MotionSequence:
    _check_stats(motion, stats)
    feats = (motion.features - stats.mean) / stats.std
    return MotionSequence(feats, motion.length, motion.representation, motion.skeleton, motion.caption)


def denormalize(motion: MotionSequence, stats: FeatureStats) -> MotionSequence:
    _check_stats(motion, stats)
    feats = motion.features * stats.std + stats.mean
    return MotionSequence(feats, motion.length, motion.representation, motion.skeleton, motion.caption)
