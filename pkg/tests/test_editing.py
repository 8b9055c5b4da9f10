"""Editing loss, guidance update, spec builders and the polyline resampler."""

import numpy as np
import pytest
import torch

from mola.data import MotionParams, make_motion
from mola.editing import (
    EditSpec,
    EditSpecError,
    GuidanceConfig,
    build_inbetweening_spec,
    build_path_following_spec,
    build_upper_body_spec,
    editing_gradient,
    editing_loss,
    mpgd_update,
    path_from_motion,
    resample_polyline,
)
from mola.features import encoder_dim, recover_global_joints
from mola.schedule import NoiseSchedule
from mola.skeleton import human_skeleton, toy_skeleton


def _motion_and_joints(length=24, action="walk", seed=3):
    skel = toy_skeleton()
    m = make_motion(MotionParams(action, "normal", max(24, length), seed=seed), skel)
    joints = recover_global_joints(m.features[: m.length].astype(np.float64), skel.n_joints)
    return skel, m, joints


def _spec_from_joints(skel, joints, mask_joint=0):
    L = joints.shape[0]
    targets = np.zeros((skel.n_joints, L, 3))
    mask = np.zeros((skel.n_joints, L))
    targets[mask_joint] = joints[:, mask_joint]
    mask[mask_joint] = 1
    return EditSpec(targets, mask, "path_following", "a person walks forward")


class TestEditingLoss:
    def test_zero_at_exact_match(self):
        skel, m, joints = _motion_and_joints()
        spec = _spec_from_joints(skel, joints)
        feats = torch.tensor(m.features[: m.length], dtype=torch.float64)
        assert float(editing_loss(feats, spec)) < 1e-9

    def test_unit_offset_in_one_entry(self):
        skel, m, joints = _motion_and_joints()
        spec = _spec_from_joints(skel, joints)
        spec.targets[0, 5, 0] += 1.0
        feats = torch.tensor(m.features[: m.length], dtype=torch.float64)
        assert abs(float(editing_loss(feats, spec)) - 1.0) < 1e-6

    def test_gradient_zero_outside_mask_frames(self):
        skel, m, joints = _motion_and_joints()
        L = m.length
        targets = np.zeros((skel.n_joints, L, 3))
        mask = np.zeros((skel.n_joints, L))
        targets[1, : L // 2] = joints[: L // 2, 1] + 0.5
        mask[1, : L // 2] = 1
        spec = EditSpec(targets, mask, "path_following", "x")
        feats = torch.tensor(m.features[:L], dtype=torch.float64, requires_grad=True)
        editing_loss(feats, spec).backward()
        # Features of frames past the mask can only matter via integration;
        # velocities at later frames never influence earlier positions.
        assert torch.all(feats.grad[L // 2 + 1 :, :3] == 0)

    def test_matches_brute_force_50_instances(self, rng):
        skel = toy_skeleton()
        for _ in range(50):
            L = int(rng.integers(4, 10))
            feats = torch.tensor(rng.normal(scale=0.05, size=(L, encoder_dim(skel.n_joints))))
            mask = (rng.random((skel.n_joints, L)) < 0.3).astype(float)
            if mask.sum() == 0:
                mask[0, 0] = 1
            targets = rng.normal(size=(skel.n_joints, L, 3))
            spec = EditSpec(targets, mask, "path_following", "x")
            got = float(editing_loss(feats, spec))
            joints = recover_global_joints(feats.numpy(), skel.n_joints)
            want = 0.0
            for j in range(skel.n_joints):
                for f in range(L):
                    if mask[j, f]:
                        want += np.linalg.norm(joints[f, j] - targets[j, f])
            assert abs(got - want) < 1e-6

    def test_empty_mask_rejected(self):
        with pytest.raises(EditSpecError):
            EditSpec(np.zeros((5, 4, 3)), np.zeros((5, 4)), "path_following", "x")


class _LinearDecoder:
    """Deterministic linear map latent -> features, a frozen-decoder stand-in."""

    def __init__(self, d_z, d_l, L, dim, seed=0):
        g = torch.Generator().manual_seed(seed)
        self.w = torch.randn(d_z * d_l, L * dim, generator=g, dtype=torch.float64) * 0.05
        self.L, self.dim = L, dim

    def __call__(self, z):
        flat = z.reshape(z.shape[0], -1).to(torch.float64)
        return (flat @ self.w).reshape(z.shape[0], self.L, self.dim)


class TestMpgdUpdate:
    def _setup(self, rng):
        skel = toy_skeleton()
        d_z, d_l, L = 4, 4, 16
        dim = encoder_dim(skel.n_joints)
        decode = _LinearDecoder(d_z, d_l, L, dim)
        targets = rng.normal(size=(skel.n_joints, L, 3))
        mask = (rng.random((skel.n_joints, L)) < 0.4).astype(float)
        mask[0, 0] = 1
        spec = EditSpec(targets, mask, "path_following", "x")
        z = torch.tensor(rng.normal(size=(1, d_z, d_l)))
        return spec, decode, z

    def test_rho_zero_is_identity(self, rng):
        spec, decode, z = self._setup(rng)
        sch = NoiseSchedule.cosine(100)
        z_prev = torch.tensor(rng.normal(size=z.shape))
        out = mpgd_update(z_prev, z, spec, 0.0, sch, 80, decode)
        assert torch.equal(out, z_prev)

    def test_exact_match_keeps_z(self, rng):
        spec, decode, z = self._setup(rng)
        feats = decode(z)
        joints = recover_global_joints(feats, spec.n_joints)[0]
        spec = EditSpec(joints.transpose(0, 1).detach().numpy(), spec.mask, "path_following", "x")
        sch = NoiseSchedule.cosine(100)
        z_prev = torch.tensor(rng.normal(size=z.shape))
        out = mpgd_update(z_prev, z, spec, 0.5, sch, 80, decode)
        assert torch.allclose(out, z_prev, atol=1e-9)

    def test_descent_on_linear_decoder(self, rng):
        spec, decode, z = self._setup(rng)
        grad, losses = editing_gradient(z, spec, decode)
        before = float(losses)
        for step in (1e-3, 1e-2):
            after = float(editing_loss(decode(z - step * grad)[0], spec))
            assert after < before

    def test_gradient_matches_finite_differences(self, rng):
        spec, decode, z = self._setup(rng)
        z = z.to(torch.float64)
        grad, _ = editing_gradient(z, spec, decode)
        eps = 1e-6
        for idx in [(0, 0, 0), (0, 1, 2), (0, 3, 3)]:
            zp, zm = z.clone(), z.clone()
            zp[idx] += eps
            zm[idx] -= eps
            fp = float(editing_loss(decode(zp)[0], spec))
            fm = float(editing_loss(decode(zm)[0], spec))
            fd = (fp - fm) / (2 * eps)
            ref = float(grad[idx])
            assert abs(fd - ref) < 1e-3 * max(1.0, abs(ref)), (idx, fd, ref)

    def test_eq10_scaling(self, rng):
        spec, decode, z = self._setup(rng)
        sch = NoiseSchedule.cosine(100)
        z_prev = torch.tensor(rng.normal(size=z.shape))
        grad, _ = editing_gradient(z, spec, decode)
        out = mpgd_update(z_prev, z, spec, 0.25, sch, 60, decode)
        want = z_prev - 0.25 * np.sqrt(sch.alpha_bar(60)) * grad
        assert torch.allclose(out, want, atol=1e-9)


class TestGuidanceConfig:
    def test_default_repeats_rule(self):
        g = GuidanceConfig()
        reps = g.repeats_for(8)
        assert reps == [1, 1, 1, 1, 1, 1, 2, 2]

    def test_explicit_list(self):
        g = GuidanceConfig(time_travel=[1, 3, 2])
        assert g.repeats_for(3) == [1, 3, 2]
        with pytest.raises(EditSpecError):
            g.repeats_for(4)

    def test_validation(self):
        with pytest.raises(EditSpecError):
            GuidanceConfig(rho=-1.0)
        with pytest.raises(EditSpecError):
            GuidanceConfig(time_travel=[0, 1])


class TestBuilders:
    def test_path_spec_masks_pelvis_only(self):
        skel = toy_skeleton()
        path = np.stack([np.linspace(0, 2, 48), np.zeros(48)], axis=-1)
        spec = build_path_following_spec(path, "a person walks forward", skel)
        assert spec.mask[0].sum() == 48 and spec.mask[1:].sum() == 0
        assert np.allclose(spec.targets[0, -1], [2.0, 0.92 - 0.02, 0.0], atol=0.05)

    def test_path_spec_circle_closes(self):
        skel = toy_skeleton()
        alpha = np.linspace(0, 2 * np.pi, 64)
        path = np.stack([np.cos(alpha), np.sin(alpha)], axis=-1)
        spec = build_path_following_spec(path, "a person walks in a circle", skel)
        assert np.linalg.norm(spec.targets[0, 0, [0, 2]] - spec.targets[0, -1, [0, 2]]) < 1e-9

    def test_path_too_short(self):
        with pytest.raises(EditSpecError):
            build_path_following_spec(np.zeros((1, 2)), "x", toy_skeleton())

    def test_resample_uniform_speed(self, rng):
        pts = np.cumsum(rng.uniform(0.1, 0.5, size=(12, 2)), axis=0)
        out = resample_polyline(pts, 48)
        seg = np.linalg.norm(np.diff(out, axis=0), axis=1)
        assert seg.std() / seg.mean() < 0.01  # uniform arc-length spacing
        total_in = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
        assert abs(seg.sum() - total_in) / total_in < 0.01

    def test_inbetweening_mask_counts(self):
        skel = toy_skeleton()
        pose = np.zeros((skel.n_joints, 3))
        spec = build_inbetweening_spec(pose, pose + 0.5, n_ctx=1, text="x", total_frames=32)
        assert spec.mask.sum() == 2 * skel.n_joints
        spec3 = build_inbetweening_spec(pose, pose, n_ctx=3, text="x", total_frames=32)
        assert spec3.mask.sum() == 2 * 3 * skel.n_joints

    def test_inbetweening_context_too_large(self):
        pose = np.zeros((5, 3))
        with pytest.raises(EditSpecError):
            build_inbetweening_spec(pose, pose, n_ctx=16, text="x", total_frames=32)

    def test_upper_body_mask_excludes_arms(self):
        skel = human_skeleton()
        m = make_motion(MotionParams("walk", "normal", 32, seed=2), skel)
        spec = build_upper_body_spec(m, "a person waves their hand")
        arm_joints = [16, 17, 18, 19, 20, 21]
        assert spec.mask[arm_joints].sum() == 0
        assert spec.mask[list(skel.lower_body)].sum() == len(skel.lower_body) * m.length

    def test_upper_body_targets_equal_input_joints(self):
        skel = human_skeleton()
        m = make_motion(MotionParams("walk", "normal", 32, seed=2), skel)
        spec = build_upper_body_spec(m, "x")
        joints = recover_global_joints(m.features[: m.length], skel.n_joints)
        for j in skel.lower_body:
            assert np.allclose(spec.targets[j, : m.length], joints[:, j], atol=1e-6)

    def test_upper_body_requires_tags(self):
        from dataclasses import replace

        from mola.skeleton import SkeletonError

        skel = toy_skeleton()
        m = make_motion(MotionParams("walk", "normal", 32, seed=2), skel)
        m.skeleton = replace(skel, lower_body=())
        with pytest.raises(SkeletonError):
            build_upper_body_spec(m, "x")

    def test_path_from_motion_pads(self):
        skel = toy_skeleton()
        m = make_motion(MotionParams("walk", "normal", 32, seed=2), skel)
        path = path_from_motion(m, 48)
        assert path.shape == (48, 2)
        assert np.allclose(path[32:], path[31])
