"""Skeleton description shared by the feature pipeline, the data generator and editing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SkeletonError(ValueError):
    """Raised when a skeleton is malformed or lacks a required tag."""


@dataclass(frozen=True)
class SkeletonSpec:
    """Joint tree with rest-pose offsets and the tags the pipeline relies on.

    ``foot_joints`` lists the four foot-end joints (left heel, left toe,
    right heel, right toe) used for contact detection.  ``heading_pair``
    is a (left, right) joint pair whose across-vector defines the facing
    direction on the ground plane.  ``lower_body`` tags the joints that
    count as lower body for editing masks.
    """

    name: str
    n_joints: int
    parent_index: tuple[int, ...]
    bone_offsets: np.ndarray  # (n_joints, 3) meters, root row is the rest root position
    fps: float = 20.0
    joint_names: tuple[str, ...] = ()
    foot_joints: tuple[int, int, int, int] | None = None
    heading_pair: tuple[int, int] | None = None
    heading_mode: str = "across"  # "across": left-right pair spans +X; "feet_forward": heel->toe spans +Z
    lower_body: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_joints < 2:
            raise SkeletonError("skeleton needs at least 2 joints")
        if self.fps <= 0:
            raise SkeletonError("fps must be positive")
        if len(self.parent_index) != self.n_joints:
            raise SkeletonError("parent_index length mismatch")
        if self.parent_index[0] != -1:
            raise SkeletonError("joint 0 must be the root (parent -1)")
        for j, p in enumerate(self.parent_index):
            if j > 0 and not (0 <= p < j):
                raise SkeletonError(f"joint {j} has invalid parent {p} (tree must be topologically ordered)")
        offs = np.asarray(self.bone_offsets, dtype=np.float64)
        if offs.shape != (self.n_joints, 3) or not np.isfinite(offs).all():
            raise SkeletonError("bone_offsets must be a finite (n_joints, 3) array")
        object.__setattr__(self, "bone_offsets", offs)

    @property
    def encoder_dim(self) -> int:
        return 4 + 9 * self.n_joints + 1

    @property
    def full_dim(self) -> int:
        return 4 + 12 * self.n_joints + 4 + 1

    def require_feet(self) -> tuple[int, int, int, int]:
        if self.foot_joints is None:
            raise SkeletonError(f"skeleton '{self.name}' does not declare foot joints")
        return self.foot_joints

    def require_lower_body(self) -> tuple[int, ...]:
        if not self.lower_body:
            raise SkeletonError(f"skeleton '{self.name}' does not tag lower-body joints")
        return self.lower_body

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_joints": self.n_joints,
            "parent_index": list(self.parent_index),
            "bone_offsets": self.bone_offsets.tolist(),
            "fps": self.fps,
            "joint_names": list(self.joint_names),
            "foot_joints": list(self.foot_joints) if self.foot_joints else None,
            "heading_pair": list(self.heading_pair) if self.heading_pair else None,
            "heading_mode": self.heading_mode,
            "lower_body": list(self.lower_body),
        }

    @staticmethod
    def from_dict(d: dict) -> "SkeletonSpec":
        return SkeletonSpec(
            name=d["name"],
            n_joints=d["n_joints"],
            parent_index=tuple(d["parent_index"]),
            bone_offsets=np.asarray(d["bone_offsets"], dtype=np.float64),
            fps=d["fps"],
            joint_names=tuple(d.get("joint_names", ())),
            foot_joints=tuple(d["foot_joints"]) if d.get("foot_joints") else None,
            heading_pair=tuple(d["heading_pair"]) if d.get("heading_pair") else None,
            heading_mode=d.get("heading_mode", "across"),
            lower_body=tuple(d.get("lower_body", ())),
        )


def _rest_positions(parents: tuple[int, ...], offsets: np.ndarray) -> np.ndarray:
    pos = np.zeros_like(offsets)
    pos[0] = offsets[0]
    for j in range(1, len(parents)):
        pos[j] = pos[parents[j]] + offsets[j]
    return pos


def toy_skeleton() -> SkeletonSpec:
    """5-joint test skeleton: pelvis plus left/right heel and toe."""
    names = ("pelvis", "l_heel", "l_toe", "r_heel", "r_toe")
    parents = (-1, 0, 1, 0, 3)
    offsets = np.array(
        [
            [0.0, 0.90, 0.0],
            [0.10, -0.88, 0.0],
            [0.0, -0.02, 0.15],
            [-0.10, -0.88, 0.0],
            [0.0, -0.02, 0.15],
        ]
    )
    return SkeletonSpec(
        name="toy5",
        n_joints=5,
        parent_index=parents,
        bone_offsets=offsets,
        fps=20.0,
        joint_names=names,
        foot_joints=(1, 2, 3, 4),
        heading_pair=(1, 3),
        heading_mode="feet_forward",
        lower_body=(0, 1, 2, 3, 4),
    )


def human_skeleton() -> SkeletonSpec:
    """22-joint humanoid with hips/knees/ankles/feet, spine, arms and head."""
    names = (
        "pelvis", "l_hip", "r_hip", "spine1", "l_knee", "r_knee", "spine2",
        "l_ankle", "r_ankle", "spine3", "l_foot", "r_foot", "neck",
        "l_collar", "r_collar", "head", "l_shoulder", "r_shoulder",
        "l_elbow", "r_elbow", "l_wrist", "r_wrist",
    )
    parents = (-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19)
    offsets = np.array(
        [
            [0.0, 0.92, 0.0],      # pelvis (rest root position)
            [0.10, -0.05, 0.0],    # l_hip
            [-0.10, -0.05, 0.0],   # r_hip
            [0.0, 0.12, 0.0],      # spine1
            [0.0, -0.40, 0.0],     # l_knee
            [0.0, -0.40, 0.0],     # r_knee
            [0.0, 0.14, 0.0],      # spine2
            [0.0, -0.42, 0.0],     # l_ankle
            [0.0, -0.42, 0.0],     # r_ankle
            [0.0, 0.14, 0.0],      # spine3
            [0.0, -0.05, 0.14],    # l_foot
            [0.0, -0.05, 0.14],    # r_foot
            [0.0, 0.10, 0.0],      # neck
            [0.08, 0.05, 0.0],     # l_collar
            [-0.08, 0.05, 0.0],    # r_collar
            [0.0, 0.12, 0.0],      # head
            [0.10, 0.0, 0.0],      # l_shoulder
            [-0.10, 0.0, 0.0],     # r_shoulder
            [0.0, -0.28, 0.0],     # l_elbow
            [0.0, -0.28, 0.0],     # r_elbow
            [0.0, -0.26, 0.0],     # l_wrist
            [0.0, -0.26, 0.0],     # r_wrist
        ]
    )
    return SkeletonSpec(
        name="human22",
        n_joints=22,
        parent_index=parents,
        bone_offsets=offsets,
        fps=20.0,
        joint_names=names,
        foot_joints=(7, 10, 8, 11),
        heading_pair=(1, 2),
        lower_body=(0, 1, 2, 4, 5, 7, 8, 10, 11),
    )


_STANDARD = {"toy5": toy_skeleton, "human22": human_skeleton, "5": toy_skeleton, "22": human_skeleton}


def standard_skeleton(key: str | int) -> SkeletonSpec:
    try:
        return _STANDARD[str(key)]()
    except KeyError:
        raise SkeletonError(f"unknown standard skeleton '{key}' (use 5/toy5 or 22/human22)") from None


def rest_pose(skeleton: SkeletonSpec) -> np.ndarray:
    """Global joint positions of the rest pose, root at the origin on XZ."""
    return _rest_positions(skeleton.parent_index, skeleton.bone_offsets)
