"""Motion file format: versioning, round-trips and atomic writes."""

import json
import os

import numpy as np
import pytest

from mola.data import MotionParams, make_motion
from mola.motionfile import (
    MotionFileError,
    dumps_motion,
    motion_from_dict,
    motion_to_dict,
    read_motion,
    write_motion,
)
from mola.skeleton import toy_skeleton


@pytest.fixture(scope="module")
def motion():
    return make_motion(MotionParams("walk", "normal", 32, seed=4), toy_skeleton())


class TestMotionFile:
    def test_round_trip(self, motion, tmp_path):
        path = str(tmp_path / "m.motion.json")
        write_motion(path, motion)
        loaded = read_motion(path, toy_skeleton())
        assert np.allclose(loaded.features, motion.features, atol=1e-6)
        assert loaded.length == motion.length
        assert loaded.caption == motion.caption

    def test_unknown_version_rejected(self, motion):
        doc = motion_to_dict(motion)
        doc["version"] = 2
        with pytest.raises(MotionFileError):
            motion_from_dict(doc, toy_skeleton())

    def test_joint_count_mismatch_rejected(self, motion):
        from mola.skeleton import human_skeleton

        doc = motion_to_dict(motion)
        with pytest.raises(MotionFileError):
            motion_from_dict(doc, human_skeleton())

    def test_deterministic_serialization(self, motion):
        assert dumps_motion(motion) == dumps_motion(motion.copy())

    def test_global_joints_and_generator_metadata(self, motion):
        doc = motion_to_dict(motion, include_global_joints=True, generator={"seed": 5, "s": 11.0})
        assert len(doc["global_joints"]) == motion.length
        assert len(doc["global_joints"][0]) == 15
        assert doc["generator"]["seed"] == 5
        parsed = json.loads(json.dumps(doc))
        assert motion_from_dict(parsed, toy_skeleton()).length == motion.length

    def test_atomic_write_leaves_no_temp_files(self, motion, tmp_path):
        path = str(tmp_path / "sub" / "m.motion.json")
        write_motion(path, motion)
        names = os.listdir(tmp_path / "sub")
        assert names == ["m.motion.json"]
