"""Procedural captioned motion dataset with ground-truth joints and stance phases.

Motions are generated analytically (gait planner over an action-specific
root path), so every sample carries exact global joint positions and
stance labels.  All randomness flows through a seeded PCG64 generator;
the same parameters always produce the same arrays.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import motionfile
from .features import (
    ENCODER,
    FeatureStats,
    MotionSequence,
    build_full_pose_features,
    to_encoder_features,
)
from .skeleton import SkeletonSpec, rest_pose

ACTIONS = ("walk", "run", "turn_left", "turn_right", "circle", "wave", "squat", "walk_then_stop")
SPEEDS = ("slow", "normal", "fast")
MIN_FRAMES, MAX_FRAMES = 24, 196

_LOCOMOTION = {"walk", "run", "turn_left", "turn_right", "circle", "walk_then_stop"}

_WALK_MPS = {"slow": 0.6, "normal": 1.0, "fast": 1.5}
_RUN_MPS = {"slow": 1.6, "normal": 2.0, "fast": 2.5}
_TEMPO = {"slow": 0.6, "normal": 1.0, "fast": 1.5}

_ADV = {"slow": " slowly", "normal": "", "fast": " quickly"}

# Two caption phrasings per action; {adv} is filled from _ADV.  The choice of
# phrasing is a deterministic function of the sample seed, so the caption set
# stays closed while giving retrieval metrics enough distinct strings.
_TEMPLATES = {
    "walk": ("a person walks forward{adv}", "someone walks straight ahead{adv}"),
    "run": ("a person runs forward{adv}", "someone runs straight ahead{adv}"),
    "turn_left": ("a person walks forward{adv} and turns left", "someone turns to the left while walking{adv}"),
    "turn_right": ("a person walks forward{adv} and turns right", "someone turns to the right while walking{adv}"),
    "circle": ("a person walks in a circle{adv}", "someone walks around in a circle{adv}"),
    "wave": ("a person waves their hand{adv}", "someone stands and waves{adv}"),
    "squat": ("a person{adv} squats down", "someone{adv} crouches down low"),
    "walk_then_stop": ("a person walks forward{adv} and then stops", "someone walks ahead{adv} and comes to a stop"),
}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class MotionParams:
    action: str
    speed: str
    length_frames: int
    seed: int

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise DatasetError(f"unknown action {self.action!r}")
        if self.speed not in SPEEDS:
            raise DatasetError(f"unknown speed {self.speed!r}")
        if not (MIN_FRAMES <= self.length_frames <= MAX_FRAMES):
            raise DatasetError(f"length_frames must be in [{MIN_FRAMES}, {MAX_FRAMES}]")

    def to_dict(self) -> dict:
        return {"action": self.action, "speed": self.speed, "length_frames": self.length_frames, "seed": self.seed}

    @staticmethod
    def from_dict(d: dict) -> "MotionParams":
        return MotionParams(d["action"], d["speed"], d["length_frames"], d["seed"])


def caption_for(params: MotionParams) -> str:
    template = _TEMPLATES[params.action][params.seed % 2]
    return template.format(adv=_ADV[params.speed])


def caption_vocabulary() -> list[str]:
    """Sorted closed vocabulary over every caption the generator can emit."""
    words: set[str] = set()
    for action in ACTIONS:
        for speed in SPEEDS:
            for template in _TEMPLATES[action]:
                words.update(template.format(adv=_ADV[speed]).split())
    return sorted(words)


def _rot_y_vec(psi: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate local (x, y, z) offsets by per-frame heading psi (about +Y)."""
    c, s = np.cos(psi), np.sin(psi)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    return np.stack([c * x + s * z, y, -s * x + c * z], axis=-1)


def _smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


@dataclass
class _RootPath:
    t: np.ndarray          # (L,) seconds
    xz: np.ndarray         # (L, 2)
    psi: np.ndarray        # (L,) heading
    speed: np.ndarray      # (L,) m/s

    def at(self, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.interp(times, self.t, self.xz[:, 0])
        z = np.interp(times, self.t, self.xz[:, 1])
        psi = np.interp(times, self.t, self.psi)
        return np.stack([x, z], axis=-1), psi


def _root_path(params: MotionParams, fps: float, rng: np.random.Generator) -> _RootPath:
    L = params.length_frames
    dt = 1.0 / fps
    t = np.arange(L) * dt
    total = t[-1] if L > 1 else dt
    action = params.action
    v = (_RUN_MPS if action == "run" else _WALK_MPS)[params.speed]

    if action in ("wave", "squat"):
        zero = np.zeros(L)
        return _RootPath(t, np.zeros((L, 2)), zero, zero)

    speed = np.full(L, v)
    if action == "walk_then_stop":
        t_stop = 0.6 * total
        ramp = max(dt, min(1.0, 0.3 * total))
        u = np.clip((t - t_stop) / ramp, 0.0, 1.0)
        speed = v * 0.5 * (1.0 + np.cos(np.pi * u))

    if action == "circle":
        alpha = 2.0 * np.pi * t / total
        radius = v * total / (2.0 * np.pi)
        xz = np.stack([radius * (1.0 - np.cos(alpha)), radius * np.sin(alpha)], axis=-1)
        return _RootPath(t, xz, alpha, speed)

    if action in ("turn_left", "turn_right"):
        delta = np.deg2rad(100.0 + rng.uniform(-10.0, 10.0))
        if action == "turn_right":
            delta = -delta
        psi = delta * _smoothstep((t / total - 0.2) / 0.6)
    else:
        psi = np.zeros(L)

    step = speed * dt
    dx = np.sin(psi) * step
    dz = np.cos(psi) * step
    xz = np.zeros((L, 2))
    xz[1:, 0] = np.cumsum(dx[:-1])
    xz[1:, 1] = np.cumsum(dz[:-1])
    return _RootPath(t, xz, psi, speed)


def _plan_feet(
    path: _RootPath,
    params: MotionParams,
    heel_rest_y: float,
    toe_local: np.ndarray,
    lat: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Heel/toe trajectories for both feet plus per-frame stance labels."""
    L = len(path.t)
    run = params.action == "run"
    v = (_RUN_MPS if run else _WALK_MPS)[params.speed]
    stride = 0.9 if run else 0.65
    t_cyc = max(0.4, stride * 2.0 / v)
    duty = 0.5 if run else 0.62
    lift = 0.08 if run else 0.04

    out = []
    stance = np.zeros((L, 2), dtype=bool)
    for side, (sign, off) in enumerate(((1.0, 0.0), (-1.0, 0.5))):
        phase_total = path.t / t_cyc + off
        k = np.floor(phase_total).astype(int)
        phi = phase_total - k
        in_stance = phi < duty

        def plant(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            times = (idx - off + duty / 2.0) * t_cyc
            pos, psi = path.at(times)
            world = pos + np.stack([np.cos(psi), -np.sin(psi)], axis=-1) * (sign * lat)
            return world, psi

        p_k, psi_k = plant(k)
        p_k1, psi_k1 = plant(k + 1)
        step_len = np.linalg.norm(p_k1 - p_k, axis=-1)
        lift_scale = np.clip(step_len / 0.05, 0.0, 1.0)

        u = _smoothstep((phi - duty) / (1.0 - duty))
        heel_xz = np.where(in_stance[:, None], p_k, p_k + (p_k1 - p_k) * u[:, None])
        heel_y = np.where(
            in_stance,
            heel_rest_y,
            heel_rest_y + lift * np.sin(np.pi * np.clip((phi - duty) / (1.0 - duty), 0.0, 1.0)) * lift_scale,
        )
        psi_foot = np.where(in_stance, psi_k, psi_k + (psi_k1 - psi_k) * u)

        heel = np.stack([heel_xz[:, 0], heel_y, heel_xz[:, 1]], axis=-1)
        toe = heel + _rot_y_vec(psi_foot, np.broadcast_to(toe_local, (L, 3)))
        out.extend([heel, toe])
        stance[:, side] = in_stance | (step_len < 1e-4)
    return out[0], out[1], out[2], out[3], stance


def _stationary_feet(L: int, rest: np.ndarray, feet: tuple[int, int, int, int]) -> tuple[list[np.ndarray], np.ndarray]:
    pts = [np.broadcast_to(rest[j], (L, 3)).copy() for j in feet]
    return pts, np.ones((L, 2), dtype=bool)


def generate_motion(params: MotionParams, skeleton: SkeletonSpec) -> tuple[np.ndarray, np.ndarray]:
    """Global joints (frames, n_joints, 3) and stance labels (frames, 2).

    Deterministic given ``params.seed``; clips start at the origin facing
    forward so feature round-trips are exact.
    """
    rng = np.random.default_rng(params.seed)
    fps = skeleton.fps
    L = params.length_frames
    path = _root_path(params, fps, rng)
    t = path.t
    rest = rest_pose(skeleton)
    feet_idx = skeleton.require_feet()
    heel_rest_y = float(rest[feet_idx[0], 1])
    toe_local = rest[feet_idx[1]] - rest[feet_idx[0]]
    lat = abs(float(rest[feet_idx[0], 0])) or 0.1
    h0 = float(rest[0, 1])

    moving = params.action in _LOCOMOTION
    tempo = _TEMPO[params.speed]

    if moving:
        heel_l, toe_l, heel_r, toe_r, stance = _plan_feet(path, params, heel_rest_y, toe_local, lat, rng)
        t_cyc = max(0.4, (0.9 if params.action == "run" else 0.65) * 2.0 / path.speed.max())
        gait_phase = 2.0 * np.pi * t / t_cyc
        speed_fade = np.clip(path.speed / max(path.speed.max(), 1e-9), 0.0, 1.0)
        bob = 0.015 * np.sin(2.0 * gait_phase) * speed_fade
        sway = np.zeros(L) if params.action == "circle" else 0.02 * np.sin(gait_phase) * speed_fade
    else:
        (heel_l, toe_l, heel_r, toe_r), stance = _stationary_feet(L, rest, feet_idx)
        gait_phase = 2.0 * np.pi * tempo * t
        bob = np.zeros(L)
        sway = np.zeros(L)

    root_y = np.full(L, h0) + bob
    if params.action == "squat":
        root_y = h0 - 0.28 * 0.5 * (1.0 - np.cos(2.0 * np.pi * 0.4 * tempo * t))
    elif params.action == "wave":
        root_y = h0 + 0.01 * np.sin(2.0 * np.pi * 0.5 * tempo * t)

    psi = path.psi
    root = np.stack(
        [path.xz[:, 0] + np.cos(psi) * sway, root_y, path.xz[:, 1] - np.sin(psi) * sway], axis=-1
    )

    G = np.zeros((L, skeleton.n_joints, 3))
    G[:, 0] = root
    G[:, feet_idx[0]] = heel_l
    G[:, feet_idx[1]] = toe_l
    G[:, feet_idx[2]] = heel_r
    G[:, feet_idx[3]] = toe_r

    if skeleton.name == "human22":
        _fill_human22(G, skeleton, psi, gait_phase, params, moving)
    elif skeleton.n_joints > 5:
        for j in range(1, skeleton.n_joints):
            if j in feet_idx:
                continue
            G[:, j] = G[:, skeleton.parent_index[j]] + _rot_y_vec(psi, np.broadcast_to(skeleton.bone_offsets[j], (L, 3)))

    # Re-express relative to the first frame so downstream feature building
    # (which assumes origin start / zero heading) round-trips exactly.
    from .features import _heading_angles, _rot_y  # local import to avoid a cycle

    theta0 = _heading_angles(G, skeleton)[0]
    origin = G[0, 0].copy()
    origin[1] = 0.0
    G = (G - origin) @ _rot_y(-theta0).T
    return G, stance


def _fill_human22(G: np.ndarray, skeleton: SkeletonSpec, psi: np.ndarray, gait_phase: np.ndarray, params: MotionParams, moving: bool) -> None:
    L = G.shape[0]
    offs = skeleton.bone_offsets
    root = G[:, 0]

    def place(j: int, parent_pos: np.ndarray, local: np.ndarray) -> np.ndarray:
        G[:, j] = parent_pos + _rot_y_vec(psi, local)
        return G[:, j]

    l_hip = place(1, root, np.broadcast_to(offs[1], (L, 3)))
    r_hip = place(2, root, np.broadcast_to(offs[2], (L, 3)))
    spine1 = place(3, root, np.broadcast_to(offs[3], (L, 3)))
    spine2 = place(6, spine1, np.broadcast_to(offs[6], (L, 3)))
    spine3 = place(9, spine2, np.broadcast_to(offs[9], (L, 3)))
    neck = place(12, spine3, np.broadcast_to(offs[12], (L, 3)))
    place(15, neck, np.broadcast_to(offs[15], (L, 3)))
    l_collar = place(13, spine3, np.broadcast_to(offs[13], (L, 3)))
    r_collar = place(14, spine3, np.broadcast_to(offs[14], (L, 3)))
    l_sho = place(16, l_collar, np.broadcast_to(offs[16], (L, 3)))
    r_sho = place(17, r_collar, np.broadcast_to(offs[17], (L, 3)))

    # Knees: midway between hip and ankle with a forward bend proportional
    # to leg compression, so squatting visibly folds the legs.
    for knee_j, hip, ankle_j in ((4, l_hip, 7), (5, r_hip, 8)):
        ankle = G[:, ankle_j]
        leg = np.linalg.norm(hip - ankle, axis=-1)
        bend = 0.04 + 0.6 * np.maximum(0.0, 0.82 - leg)
        G[:, knee_j] = 0.5 * (hip + ankle) + _rot_y_vec(psi, np.stack([np.zeros(L), np.zeros(L), bend], axis=-1))

    swing = 0.10 if moving else 0.0
    amp = swing * (1.5 if params.action == "run" else 1.0)
    zl = amp * np.sin(gait_phase)
    zr = -zl
    for sho, elbow_j, wrist_j, z in ((l_sho, 18, 20, zl), (r_sho, 19, 21, zr)):
        elbow_local = np.stack([np.zeros(L), np.full(L, offs[elbow_j][1]), 0.6 * z], axis=-1)
        G[:, elbow_j] = sho + _rot_y_vec(psi, elbow_local)
        wrist_local = np.stack([np.zeros(L), np.full(L, offs[wrist_j][1]), 0.8 * z], axis=-1)
        G[:, wrist_j] = G[:, elbow_j] + _rot_y_vec(psi, wrist_local)

    if params.action == "wave":
        # Right arm raised, hand oscillating sideways overhead.
        osc = 0.10 * np.sin(gait_phase)
        G[:, 19] = r_sho + _rot_y_vec(psi, np.stack([np.full(L, -0.10), np.full(L, 0.18), np.zeros(L)], axis=-1))
        G[:, 21] = G[:, 19] + _rot_y_vec(psi, np.stack([osc - 0.05, np.full(L, 0.24), np.zeros(L)], axis=-1))


@dataclass
class DatasetSplit:
    train: list[MotionSequence]
    val: list[MotionSequence]
    test: list[MotionSequence]
    stats: FeatureStats
    skeleton: SkeletonSpec
    seed: int
    params: dict[str, list[MotionParams]] = field(default_factory=dict)

    def all_splits(self) -> dict[str, list[MotionSequence]]:
        return {"train": self.train, "val": self.val, "test": self.test}


def _sample_length(rng: np.random.Generator) -> int:
    """Bimodal mixture of truncated normals over [24, 196]."""
    while True:
        if rng.random() < 0.55:
            x = rng.normal(60.0, 15.0)
        else:
            x = rng.normal(150.0, 20.0)
        if MIN_FRAMES <= x <= MAX_FRAMES:
            return int(round(x))


def sample_params(n: int, seed: int, rng: np.random.Generator | None = None) -> list[MotionParams]:
    rng = rng or np.random.default_rng(seed)
    out = []
    for _ in range(n):
        action = ACTIONS[rng.integers(len(ACTIONS))]
        speed = SPEEDS[rng.integers(len(SPEEDS))]
        length = _sample_length(rng)
        out.append(MotionParams(action, speed, length, int(rng.integers(0, 2**31 - 1))))
    return out


def make_motion(params: MotionParams, skeleton: SkeletonSpec) -> MotionSequence:
    G, _ = generate_motion(params, skeleton)
    enc = to_encoder_features(build_full_pose_features(G, skeleton))
    enc.caption = caption_for(params)
    return enc


def make_motion_full(params: MotionParams, skeleton: SkeletonSpec) -> MotionSequence:
    """Full-representation variant used by the encoder-input ablation."""
    G, _ = generate_motion(params, skeleton)
    full = build_full_pose_features(G, skeleton)
    full.caption = caption_for(params)
    return full


def build_dataset(n: int, seed: int, skeleton: SkeletonSpec) -> DatasetSplit:
    """80/5/15 split with train-only normalization stats."""
    if n < 40:
        raise DatasetError("need at least 40 samples to build a dataset")
    params = sample_params(n, seed)
    motions = [make_motion(p, skeleton) for p in params]

    n_train = int(n * 0.8)
    n_val = int(n * 0.05)
    split_params = {
        "train": params[:n_train],
        "val": params[n_train : n_train + n_val],
        "test": params[n_train + n_val :],
    }
    train = motions[:n_train]
    val = motions[n_train : n_train + n_val]
    test = motions[n_train + n_val :]

    frames = np.concatenate([m.features for m in train], axis=0)
    stats = FeatureStats.compute(frames, identity_channels=(frames.shape[1] - 1,))
    return DatasetSplit(train, val, test, stats, skeleton, seed, split_params)


def save_dataset(split: DatasetSplit, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"seed": split.seed, "skeleton": split.skeleton.to_dict(), "splits": {}}
    for name, motions in split.all_splits().items():
        entries = []
        for i, m in enumerate(motions):
            rel = os.path.join("motions", f"{name}_{i:05d}.motion.json")
            motionfile.write_motion(os.path.join(out_dir, rel), m)
            entries.append({"path": rel, "caption": m.caption, "params": split.params[name][i].to_dict()})
        manifest["splits"][name] = entries
    motionfile.atomic_write_json(os.path.join(out_dir, "stats.json"), split.stats.to_dict())
    motionfile.atomic_write_json(os.path.join(out_dir, "manifest.json"), manifest)


def load_dataset(path: str) -> DatasetSplit:
    import json

    with open(os.path.join(path, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    skeleton = SkeletonSpec.from_dict(manifest["skeleton"])
    with open(os.path.join(path, "stats.json"), encoding="utf-8") as fh:
        stats = FeatureStats.from_dict(json.load(fh))
    splits: dict[str, list[MotionSequence]] = {}
    params: dict[str, list[MotionParams]] = {}
    for name, entries in manifest["splits"].items():
        motions, plist = [], []
        for e in entries:
            m = motionfile.read_motion(os.path.join(path, e["path"]), skeleton)
            m.caption = e["caption"]
            motions.append(m)
            plist.append(MotionParams.from_dict(e["params"]))
        splits[name] = motions
        params[name] = plist
    return DatasetSplit(splits["train"], splits["val"], splits["test"], stats, skeleton, manifest["seed"], params)
