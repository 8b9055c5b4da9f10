"""Metric oracles and invariants."""

import numpy as np
import pytest

from mola.data import MotionParams, make_motion
from mola.editing import EditSpec
from mola.features import MotionSequence
from mola.metrics import (
    MetricError,
    aits,
    control_errors,
    default_length_bins,
    diversity,
    fid,
    jensen_shannon,
    length_distribution_report,
    length_histogram,
    mm_dist,
    mmodality,
    mpjpe,
    r_precision,
    rfid,
    wasserstein_1d,
)
from mola.skeleton import toy_skeleton


class TestFid:
    def test_identical_sets_zero(self, rng):
        a = rng.normal(size=(200, 8))
        assert abs(fid(a, a.copy())) < 1e-6

    def test_symmetry(self, rng):
        a = rng.normal(size=(150, 6))
        b = rng.normal(loc=0.3, size=(180, 6))
        assert abs(fid(a, b) - fid(b, a)) < 1e-8

    def test_mean_shift_closed_form(self, rng):
        # identical covariance by construction: the same sample shifted by d
        a = rng.normal(size=(300, 5))
        d = np.array([1.0, -2.0, 0.5, 0.0, 3.0])
        b = a + d
        assert abs(fid(a, b) - d @ d) < 1e-4

    def test_matches_scipy_sqrtm_oracle(self, rng):
        from scipy import linalg

        for _ in range(10):
            a = rng.normal(size=(120, 4)) @ rng.normal(size=(4, 4))
            b = rng.normal(loc=0.5, size=(140, 4)) @ rng.normal(size=(4, 4))
            mu1, mu2 = a.mean(0), b.mean(0)
            s1 = np.cov(a, rowvar=False)
            s2 = np.cov(b, rowvar=False)
            covmean = linalg.sqrtm(s1 @ s2)
            if np.iscomplexobj(covmean):
                covmean = covmean.real
            want = float((mu1 - mu2) @ (mu1 - mu2) + np.trace(s1 + s2 - 2 * covmean))
            assert abs(fid(a, b) - want) < 1e-4

    def test_too_few_samples(self, rng):
        with pytest.raises(MetricError):
            fid(rng.normal(size=(4, 8)), rng.normal(size=(100, 8)))


class TestRPrecision:
    def test_perfect_retrieval(self, rng):
        text = rng.normal(size=(64, 8)) * 10
        gen = text + rng.normal(size=(64, 8)) * 0.01
        rates = r_precision(gen, text, rng=rng)
        assert rates[1] == 1.0 and rates[2] == 1.0 and rates[3] == 1.0

    def test_random_features_near_chance(self):
        rng = np.random.default_rng(7)
        n = 2000
        gen = rng.normal(size=(n, 16))
        text = rng.normal(size=(n, 16))
        rates = r_precision(gen, text, rng=rng)
        p = 1 / 32
        sigma = np.sqrt(p * (1 - p) / n)
        assert abs(rates[1] - p) < 3 * sigma

    def test_monotone_in_k(self, rng):
        gen = rng.normal(size=(100, 8))
        text = rng.normal(size=(100, 8))
        rates = r_precision(gen, text, rng=rng)
        assert rates[1] <= rates[2] <= rates[3] <= 1.0
        assert all(0.0 <= rates[k] for k in rates)

    def test_needs_pool(self, rng):
        with pytest.raises(MetricError):
            r_precision(rng.normal(size=(10, 4)), rng.normal(size=(10, 4)), rng=rng)


class TestMmDist:
    def test_identical_zero(self, rng):
        f = rng.normal(size=(40, 6))
        assert mm_dist(f, f.copy()) == 0.0

    def test_unit_offset(self, rng):
        f = rng.normal(size=(40, 6))
        g = f.copy()
        g[:, 0] += 1.0
        assert abs(mm_dist(g, f) - 1.0) < 1e-12

    def test_matches_loop_oracle(self, rng):
        a = rng.normal(size=(30, 5))
        b = rng.normal(size=(30, 5))
        want = np.mean([np.sqrt(((a[i] - b[i]) ** 2).sum()) for i in range(30)])
        assert abs(mm_dist(a, b) - want) < 1e-9
        want_sq = np.mean([((a[i] - b[i]) ** 2).sum() for i in range(30)])
        assert abs(mm_dist(a, b, squared=True) - want_sq) < 1e-9


class TestDiversity:
    def test_identical_features_zero(self):
        f = np.ones((50, 4))
        assert diversity(f, subset_size=10) == 0.0

    def test_two_point_case(self):
        f = np.array([[0.0, 0.0], [3.0, 0.0]])
        assert abs(diversity(f, subset_size=1) - 3.0) < 1e-12

    def test_seeded_reproducible(self, rng):
        f = np.random.default_rng(1).normal(size=(100, 6))
        a = diversity(f, subset_size=20, rng=np.random.default_rng(5))
        b = diversity(f, subset_size=20, rng=np.random.default_rng(5))
        assert a == b

    def test_shrinks_with_warning(self, rng):
        f = rng.normal(size=(20, 4))
        with pytest.warns(UserWarning):
            diversity(f, subset_size=300)


class TestMModality:
    def test_deterministic_generator_zero(self):
        per = {"walk": np.tile(np.array([[1.0, 2.0]]), (8, 1))}
        assert mmodality(per, repeats=4) == 0.0

    def test_single_pair_reduces_to_distance(self):
        per = {"x": np.array([[0.0, 0.0], [0.0, 4.0]])}
        assert abs(mmodality(per, repeats=1) - 4.0) < 1e-12

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(3)
        per = {f"c{k}": rng.normal(size=(12, 5)) for k in range(4)}
        got = mmodality(per, repeats=5, rng=np.random.default_rng(9))
        ref_rng = np.random.default_rng(9)
        dists = []
        for caption in sorted(per):
            feats = per[caption]
            idx = ref_rng.permutation(len(feats))[:10]
            first, second = idx[:5], idx[5:]
            for i in range(5):
                dists.append(np.linalg.norm(feats[first[i]] - feats[second[i]]))
        assert abs(got - np.mean(dists)) < 1e-9


class TestLengthDistribution:
    def test_identical_histograms(self):
        lengths = np.array([30, 60, 90, 120, 150] * 10)
        jsd, emd = length_distribution_report(lengths, lengths.copy())
        assert jsd == 0.0 and emd == 0.0

    def test_point_masses_emd(self):
        jsd, emd = length_distribution_report(np.full(50, 60), np.full(50, 80))
        assert abs(emd - 20.0) < 1e-9
        assert jsd == 1.0  # disjoint bins

    def test_jsd_bounds(self, rng):
        bins = default_length_bins()
        for _ in range(10):
            a = rng.integers(24, 197, size=100)
            b = rng.integers(24, 197, size=80)
            v = jensen_shannon(length_histogram(a, bins), length_histogram(b, bins))
            assert 0.0 <= v <= 1.0

    def test_wasserstein_unequal_sizes(self):
        a = np.array([0.0, 1.0])
        b = np.array([0.0, 0.0, 3.0])
        # quantile functions: |CDF diff| integrated; brute check via large resample
        fine = np.linspace(0, 1, 60001)[1:-1]
        qa = np.quantile(a, fine, method="inverted_cdf")
        qb = np.quantile(b, fine, method="inverted_cdf")
        want = np.abs(qa - qb).mean()
        assert abs(wasserstein_1d(a, b) - want) < 1e-3


class TestControlErrors:
    def _spec_and_motion(self, offset=0.0):
        skel = toy_skeleton()
        motion = make_motion(MotionParams("walk", "normal", 48, seed=5), skel)
        from mola.features import recover_global_joints

        joints = recover_global_joints(motion.features[: motion.length], skel.n_joints)
        targets = np.zeros((skel.n_joints, motion.length, 3))
        mask = np.zeros((skel.n_joints, motion.length))
        targets[0] = joints[:, 0]
        targets[0, :, 0] += offset
        mask[0, :] = 1
        return motion, EditSpec(targets, mask, "path_following", "walk")

    def test_perfect_match(self):
        motion, spec = self._spec_and_motion(0.0)
        traj, loc, avg = control_errors([motion], [spec])
        assert traj == 0.0 and loc == 0.0 and avg < 1e-6

    def test_single_offender(self):
        motion, spec = self._spec_and_motion(0.0)
        spec.targets[0, 10, 0] += 0.6
        traj, loc, avg = control_errors([motion], [spec])
        assert traj == 1.0
        assert abs(loc - 1 / motion.length) < 1e-9
        assert abs(avg - 0.6 / motion.length) < 1e-6

    def test_batch_matches_loop_oracle(self, rng):
        motions, specs = [], []
        for k in range(4):
            m, s = self._spec_and_motion(float(rng.uniform(0, 1)))
            motions.append(m)
            specs.append(s)
        traj, loc, avg = control_errors(motions, specs, thresh=0.5)
        from mola.features import recover_global_joints

        all_errs, traj_flags = [], []
        for m, s in zip(motions, specs):
            joints = recover_global_joints(m.features[: m.length], 5)
            errs = []
            for j in range(5):
                for f in range(m.length):
                    if s.mask[j, f]:
                        errs.append(np.linalg.norm(joints[f, j] - s.targets[j, f]))
            all_errs.extend(errs)
            traj_flags.append(max(errs) > 0.5)
        assert abs(avg - np.mean(all_errs)) < 1e-9
        assert abs(loc - np.mean(np.array(all_errs) > 0.5)) < 1e-9
        assert abs(traj - np.mean(traj_flags)) < 1e-9

    def test_zero_iff_all_zero(self):
        motion, spec = self._spec_and_motion(0.0)
        traj, loc, avg = control_errors([motion], [spec])
        assert (avg < 1e-9) == (loc == 0.0) == (traj == 0.0)


class TestMpjpe:
    def test_identical_zero(self):
        skel = toy_skeleton()
        m = make_motion(MotionParams("walk", "normal", 32, seed=1), skel)
        assert mpjpe(m, m.copy()) == 0.0

    def test_uniform_vertical_offset(self):
        skel = toy_skeleton()
        m = make_motion(MotionParams("wave", "normal", 32, seed=1), skel)
        shifted = m.copy()
        shifted.features[:, 3] += 0.01  # root height
        for j in range(skel.n_joints):
            shifted.features[:, 4 + 3 * j + 1] += 0.01  # local Y per joint
        assert abs(mpjpe(shifted, m) - 10.0) < 1e-3

    def test_rfid_is_fid(self, rng):
        a = rng.normal(size=(100, 6))
        b = rng.normal(size=(120, 6))
        assert rfid(a, b) == fid(b, a)


class TestAits:
    def test_needs_positive_n(self):
        with pytest.raises(MetricError):
            aits(lambda t: None, ["hi"], 0)

    def test_reports_hardware(self):
        result = aits(lambda t: None, ["hi"], 3)
        assert result.n == 3 and result.seconds >= 0.0
        assert "torch" in result.hardware
