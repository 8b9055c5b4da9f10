"""End-to-end metric report over a trained bundle."""

import pytest

from mola.evaluation_runner import evaluate_bundle
from mola.evalenc import train_eval_encoders


@pytest.fixture(scope="module")
def report(micro_bundle, toy_dataset):
    encoders = train_eval_encoders(toy_dataset, seed=1, d_e=8, iters=120)
    return evaluate_bundle(
        micro_bundle, toy_dataset, seed=3, n_samples=32, mm_captions=2, mm_repeats=2,
        control_prompts=2, aits_n=2, encoders=encoders,
    )


class TestEvaluateBundle:
    def test_report_has_all_metric_groups(self, report):
        d = report.to_dict()
        for key in ("fid", "rfid", "mm_dist", "diversity", "mmodality", "mpjpe_mm",
                    "jsd", "emd_frames", "traj_err", "loc_err", "avg_err", "aits_seconds",
                    "r_precision_top1", "r_precision_top3"):
            assert d[key] is not None, key

    def test_rates_are_probabilities(self, report):
        for v in (report.r_precision_top1, report.r_precision_top2, report.r_precision_top3,
                  report.traj_err, report.loc_err):
            assert 0.0 <= v <= 1.0
        assert report.r_precision_top1 <= report.r_precision_top2 <= report.r_precision_top3

    def test_banner_and_hashes_present(self, report):
        d = report.to_dict()
        assert "not comparable" in d["note"]
        assert d["evaluator_hash"] and d["checkpoint_id"]
        assert "torch" in d["hardware"]

    def test_finite_values(self, report):
        import math

        for key, value in report.to_dict().items():
            if isinstance(value, float):
                assert math.isfinite(value), key


class TestAitsMonotone:
    def test_more_steps_cost_more(self, micro_bundle):
        from mola.metrics import aits
        from mola.sampling import sample_text_to_motion

        def sampler(steps):
            return lambda text: sample_text_to_motion(text, 0, micro_bundle, steps=steps)

        fast = aits(sampler(2), ["a person walks forward"], 3)
        slow = aits(sampler(10), ["a person walks forward"], 3)
        assert slow.seconds > fast.seconds
