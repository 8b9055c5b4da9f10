"""Reader/writer for the versioned ``.motion.json`` interchange format."""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .features import ENCODER, FULL, InvalidMotionError, MotionSequence, recover_global_joints
from .skeleton import SkeletonSpec

FORMAT_VERSION = 1


class MotionFileError(ValueError):
    """Raised on malformed or unsupported motion files."""


def motion_to_dict(
    motion: MotionSequence,
    include_global_joints: bool = False,
    generator: dict | None = None,
) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "fps": motion.skeleton.fps,
        "n_joints": motion.skeleton.n_joints,
        "length": motion.length,
        "representation": motion.representation,
        "features": [[float(v) for v in row] for row in motion.features],
        "caption": motion.caption,
    }
    if include_global_joints:
        joints = recover_global_joints(motion.features[: motion.length], motion.skeleton.n_joints)
        doc["global_joints"] = [[float(v) for v in frame.reshape(-1)] for frame in joints]
    if generator is not None:
        doc["generator"] = generator
    return doc


def dumps_motion(motion: MotionSequence, **kwargs) -> str:
    """Deterministic serialization: sorted keys, no whitespace variation."""
    return json.dumps(motion_to_dict(motion, **kwargs), sort_keys=True, separators=(",", ":"))


def write_motion(path: str, motion: MotionSequence, **kwargs) -> None:
    data = dumps_motion(motion, **kwargs)
    _atomic_write_text(path, data)


def motion_from_dict(doc: dict, skeleton: SkeletonSpec) -> MotionSequence:
    if doc.get("version") != FORMAT_VERSION:
        raise MotionFileError(f"unsupported motion file version {doc.get('version')!r}")
    if doc.get("n_joints") != skeleton.n_joints:
        raise MotionFileError(f"file has {doc.get('n_joints')} joints, skeleton has {skeleton.n_joints}")
    rep = doc.get("representation")
    if rep not in (ENCODER, FULL):
        raise MotionFileError(f"unknown representation {rep!r}")
    feats = np.asarray(doc["features"], dtype=np.float32)
    try:
        return MotionSequence(feats, int(doc["length"]), rep, skeleton, doc.get("caption"))
    except InvalidMotionError as exc:
        raise MotionFileError(str(exc)) from exc


def read_motion(path: str, skeleton: SkeletonSpec) -> MotionSequence:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return motion_from_dict(doc, skeleton)


def _atomic_write_text(path: str, text: str) -> None:
    """Write-then-rename so readers never observe partial files."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: str, obj) -> None:
    _atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=1))
