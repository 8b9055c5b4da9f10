"""Stage-1/Stage-2 training loops: shapes, determinism, checkpoints, divergence."""

import numpy as np
import pytest
import torch

from mola.config import DiffusionConfig, VaeConfig
from mola.data import build_dataset
from mola.features import encoder_dim
from mola.models import Denoiser, Discriminator, VaeModel
from mola.sampling import InferenceBundle, sample_text_to_motion
from mola.skeleton import toy_skeleton
from mola.train_ldm import train_stage2
from mola.train_vae import load_stage1_model, train_stage1, untrained_val_mpjpe

TINY_VAE = dict(seq_len=64, width=24, d_w=32, total_iters=24, batch_size=8, eval_every=12,
                lr_drop_iters=20, checkpoint_every=12, log_every=4, position_enhance_weight=0.0)


@pytest.fixture(scope="module")
def tiny_dataset():
    return build_dataset(48, seed=13, skeleton=toy_skeleton())


class TestVaeModel:
    def test_encode_decode_shapes(self):
        cfg = VaeConfig(seq_len=64, width=16, d_z=8)
        dim = encoder_dim(5)
        model = VaeModel(dim, cfg)
        for L in (64, 96, 196):
            if L % 4:
                continue
            x = torch.randn(2, dim, L)
            mean, logvar = model.encode(x)
            assert mean.shape == (2, 8, L // 4) == logvar.shape
            motion, act, logits = model.decode(mean)
            assert motion.shape == (2, dim - 1, L)
            assert act.shape == (2, L) == logits.shape
            assert torch.all((act > 0) & (act < 1))

    def test_posterior_sampling(self):
        mean = torch.randn(3, 4, 2)
        logvar = torch.full((3, 4, 2), -30.0)
        z = VaeModel.sample_posterior(mean, logvar, torch.randn(3, 4, 2))
        assert torch.allclose(z, mean, atol=1e-5)
        noise = torch.zeros(3, 4, 2)
        assert torch.equal(VaeModel.sample_posterior(mean, torch.zeros_like(mean), noise), mean)
        with pytest.raises(ValueError):
            VaeModel.sample_posterior(mean, logvar, torch.randn(1, 4, 2))

    def test_san_direction_unit_norm_after_projection(self):
        disc = Discriminator(10, 16, 8, san=True)
        opt = torch.optim.SGD(disc.parameters(), lr=0.5)
        x = torch.randn(4, 10, 64)
        for _ in range(3):
            f, h = disc(x)
            loss = f.mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
            disc.project_direction()
            assert abs(disc.direction.norm().item() - 1.0) < 1e-6


class TestTrainStage1:
    def test_smoke_run_decreases_recon(self, tiny_dataset):
        from mola.train_vae import _prepare_features, _window_batch

        def mean_recon(result, feats):
            x = _window_batch(feats, np.arange(len(feats)), result.cfg.seq_len, np.random.default_rng(0))
            with torch.no_grad():
                mean, _ = result.model.encode(x)
                motion, _, _ = result.model.decode(mean)
            return float(((motion - x[:, :-1]) ** 2).mean())

        overrides = dict(TINY_VAE, total_iters=200, adversary="san", width=32, lr=5e-4,
                         lr_drop_iters=10**6, batch_size=8)
        cfg = VaeConfig(**overrides)
        feats = _prepare_features(tiny_dataset, cfg, "val")
        before = mean_recon(train_stage1(tiny_dataset, VaeConfig(**dict(overrides, total_iters=1)), seed=5), feats)
        after = mean_recon(train_stage1(tiny_dataset, cfg, seed=5), feats)
        assert after < 0.7 * before

    def test_adversary_none_has_no_adv_terms(self, tiny_dataset):
        cfg = VaeConfig(**{**TINY_VAE, "adversary": "none"})
        result = train_stage1(tiny_dataset, cfg, seed=5)
        assert result.discriminator is None
        assert all("adv" not in row and "disc" not in row for row in result.log)

    def test_deterministic_given_seed(self, tiny_dataset):
        cfg = VaeConfig(**TINY_VAE)
        a = train_stage1(tiny_dataset, cfg, seed=9)
        b = train_stage1(tiny_dataset, cfg, seed=9)
        la = [r["loss"] for r in a.log]
        lb = [r["loss"] for r in b.log]
        assert la == lb
        for pa, pb in zip(a.model.parameters(), b.model.parameters()):
            assert torch.equal(pa, pb)

    def test_resume_reproduces_full_run(self, tiny_dataset, tmp_path):
        cfg = VaeConfig(**TINY_VAE)
        full = train_stage1(tiny_dataset, cfg, seed=3, out_dir=str(tmp_path / "full"))

        half_cfg = VaeConfig(**{**TINY_VAE, "total_iters": 12})
        train_stage1(tiny_dataset, half_cfg, seed=3, out_dir=str(tmp_path / "half"))
        resumed = train_stage1(tiny_dataset, cfg, seed=3, resume_from=str(tmp_path / "half"))

        for pa, pb in zip(full.model.parameters(), resumed.model.parameters()):
            assert torch.equal(pa, pb)
        tail_full = [r["loss"] for r in full.log if r["iter"] >= 12]
        tail_res = [r["loss"] for r in resumed.log if r["iter"] >= 12]
        assert tail_full == tail_res

    def test_checkpoint_round_trip_bit_exact(self, tiny_dataset, tmp_path):
        cfg = VaeConfig(**TINY_VAE)
        result = train_stage1(tiny_dataset, cfg, seed=4, out_dir=str(tmp_path / "ckpt"))
        loaded = load_stage1_model(str(tmp_path / "ckpt"))
        for pa, pb in zip(result.model.state_dict().values(), loaded.model.state_dict().values()):
            assert torch.equal(pa, pb)
        assert loaded.cfg.to_dict() == cfg.to_dict()
        assert np.array_equal(loaded.stats.mean, result.stats.mean)

    def test_divergence_aborts(self, tiny_dataset):
        from mola.train_vae import TrainingDivergedError

        cfg = VaeConfig(**{**TINY_VAE, "lr": 1e12, "total_iters": 30, "adversary": "none"})
        with pytest.raises(TrainingDivergedError):
            train_stage1(tiny_dataset, cfg, seed=1)

    def test_untrained_baseline_large(self, tiny_dataset):
        cfg = VaeConfig(**TINY_VAE)
        assert untrained_val_mpjpe(tiny_dataset, cfg, seed=5) > 100.0  # mm


class TestTrainStage2:
    @pytest.fixture(scope="class")
    def stage1(self, tiny_dataset):
        return train_stage1(tiny_dataset, VaeConfig(**{**TINY_VAE, "total_iters": 60}), seed=5)

    def test_init_loss_matches_latent_size(self, tiny_dataset, stage1):
        cfg = DiffusionConfig(total_iters=2, batch_size=48, d_model=32, n_blocks=1, n_heads=2,
                              mlp_expand=1, d_cond=16, text_layers=1, eval_every=1000, log_every=1)
        result = train_stage2(stage1, tiny_dataset, cfg, seed=6)
        d_z, d_l = stage1.cfg.d_z, stage1.cfg.seq_len // 4
        first = result.log[0]["loss"]
        assert abs(first - d_z * d_l) / (d_z * d_l) < 0.10

    def test_condition_drop_rate(self, tiny_dataset, stage1):
        cfg = DiffusionConfig(total_iters=160, batch_size=64, d_model=32, n_blocks=1, n_heads=2,
                              mlp_expand=1, d_cond=16, text_layers=1, eval_every=1000)
        result = train_stage2(stage1, tiny_dataset, cfg, seed=6)
        rate = result.cond_drop_count / result.sample_count
        assert abs(rate - 0.1) < 0.01

    def test_deterministic_losses(self, tiny_dataset, stage1):
        cfg = DiffusionConfig(total_iters=30, batch_size=8, d_model=32, n_blocks=1, n_heads=2,
                              mlp_expand=1, d_cond=16, text_layers=1, eval_every=1000, log_every=1)
        a = train_stage2(stage1, tiny_dataset, cfg, seed=8)
        b = train_stage2(stage1, tiny_dataset, cfg, seed=8)
        assert [r["loss"] for r in a.log] == [r["loss"] for r in b.log]


class TestDenoiser:
    def test_output_shape_matches_input(self):
        for d_z, d_l in ((4, 4), (16, 16), (8, 49)):
            net = Denoiser(d_z, d_l, d_cond=16, d_model=32, n_blocks=1, n_heads=2, mlp_expand=1)
            z = torch.randn(3, d_z, d_l)
            out = net(z, torch.full((3,), 500), torch.randn(3, 16))
            assert out.shape == z.shape

    def test_zero_at_init(self):
        net = Denoiser(4, 4, 16, 32, 1, 2, 1)
        out = net(torch.randn(2, 4, 4), torch.tensor([1, 999]), torch.randn(2, 16))
        assert torch.all(out == 0.0)


class TestSamplingWithBundle:
    def test_same_text_seed_identical(self, micro_bundle):
        a, _ = sample_text_to_motion("a person walks forward", 42, micro_bundle)
        b, _ = sample_text_to_motion("a person walks forward", 42, micro_bundle)
        assert np.array_equal(a.features, b.features)

    def test_length_in_range(self, micro_bundle):
        for seed in range(5):
            m, _ = sample_text_to_motion("a person runs forward", seed, micro_bundle)
            assert 1 <= m.length <= micro_bundle.vae_cfg.seq_len

    def test_unknown_token_raises(self, micro_bundle):
        from mola.text import TokenizerError

        with pytest.raises(TokenizerError):
            sample_text_to_motion("a person does parkour", 1, micro_bundle)

    def test_bundle_save_load_identical_outputs(self, micro_bundle, tmp_path):
        from mola.checkpoint import save_bundle

        a, _ = sample_text_to_motion("a person walks forward", 3, micro_bundle)
        out = str(tmp_path / "bundle2")
        save_bundle(
            out, micro_bundle.vae_cfg, micro_bundle.ldm_cfg, micro_bundle.skeleton, micro_bundle.stats,
            {"mean": micro_bundle.latent_mean.tolist(), "std": micro_bundle.latent_std.tolist()},
            micro_bundle.text_encoder.tokenizer.vocab, {"stage1": 0, "stage2": 0},
            micro_bundle.vae.state_dict(), micro_bundle.denoiser.state_dict(),
            micro_bundle.text_encoder.state_dict(),
        )
        loaded = InferenceBundle.load(out)
        b, _ = sample_text_to_motion("a person walks forward", 3, loaded)
        assert np.array_equal(a.features, b.features)
