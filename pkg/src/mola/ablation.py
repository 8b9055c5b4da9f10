"""Ablation harness: latent width, adversary type and encoder-input variants.

Every cell trains from fixed seeds, so a rerun with the same inputs
reproduces the report bit-exactly; each row records the seed and the
checkpoint hash of the models it measured.
"""

from __future__ import annotations

import csv
import os

import numpy as np
import torch

from .checkpoint import content_hash
from .config import DiffusionConfig, VaeConfig
from .data import DatasetSplit
from .editing import GuidanceConfig, build_path_following_spec, guided_sample_batch, path_from_motion
from .evalenc import EvalEncoders, train_eval_encoders
from .features import ENCODER, FULL, MotionSequence, clip_by_activation, to_encoder_features
from .metrics import control_errors, fid, mm_dist, mpjpe
from .motionfile import atomic_write_json
from .sampling import InferenceBundle, sample_batch
from .train_ldm import train_stage2
from .train_vae import Stage1Result, _prepare_features, _window_batch, train_stage1


def reconstruct_motions(stage1: Stage1Result, dataset: DatasetSplit, split: str = "test") -> list[MotionSequence]:
    """Posterior-mean reconstructions of a split, in the training representation."""
    cfg = stage1.cfg
    feats = _prepare_features(dataset, cfg, split)
    stats = stage1.stats
    rep = FULL if cfg.encoder_input == "full" else ENCODER
    out = []
    rng = np.random.default_rng(0)
    with torch.no_grad():
        for i in range(0, len(feats), 64):
            chunk = feats[i : i + 64]
            x = _window_batch(chunk, np.arange(len(chunk)), cfg.seq_len, rng)
            mean, _ = stage1.model.encode(x)
            motion, act, _ = stage1.model.decode(mean)
            recon = torch.cat([motion, act.unsqueeze(1)], dim=1).transpose(1, 2).numpy()
            for j, r in enumerate(recon):
                raw = r * stats.std + stats.mean
                n = min(dataset.all_splits()[split][i + j].length, cfg.seq_len)
                out.append(MotionSequence(raw, n, rep, dataset.skeleton))
    return out


def _as_encoder_rep(motions: list[MotionSequence]) -> list[MotionSequence]:
    return [to_encoder_features(m) if m.representation == FULL else m for m in motions]


_AXES: list[tuple[str, str, dict]] = [
    ("latent_dim", "d_z=8", {"d_z": 8}),
    ("latent_dim", "d_z=16", {"d_z": 16}),
    ("latent_dim", "d_z=32", {"d_z": 32}),
    ("adversary", "none", {"adversary": "none"}),
    ("adversary", "gan", {"adversary": "gan"}),
    ("adversary", "san", {"adversary": "san"}),
    ("encoder_input", "reduced", {"encoder_input": "encoder"}),
    ("encoder_input", "full", {"encoder_input": "full"}),
]


def run_ablation_suite(
    configs: dict,
    dataset: DatasetSplit,
    seeds: list[int],
    out_dir: str | None = None,
    encoders: EvalEncoders | None = None,
) -> dict:
    """Train/evaluate the factor grid and emit the two result tables.

    ``configs`` holds ``vae`` / ``ldm`` override dicts applied to every cell,
    plus optional ``gen_samples``, ``include_generation``, ``include_control``
    and ``control_prompts`` knobs controlling evaluation cost.
    """
    base_vae = dict(configs.get("vae", {}))
    base_ldm = dict(configs.get("ldm", {}))
    gen_samples = int(configs.get("gen_samples", 16))
    include_generation = bool(configs.get("include_generation", True))
    include_control = bool(configs.get("include_control", True))
    control_prompts = int(configs.get("control_prompts", 4))
    guidance_rho = float(configs.get("guidance_rho", 0.1))

    if encoders is None:
        encoders = train_eval_encoders(
            dataset, seed=seeds[0], iters=int(configs.get("eval_iters", 200)),
            d_e=int(configs.get("eval_d_e", 64)),
        )

    test = dataset.test
    test_enc = _as_encoder_rep(test)
    real_emb = encoders.embed_motions(test_enc)

    rows: list[dict] = []
    control_rows: list[dict] = []
    for seed in seeds:
        for axis, label, overrides in _AXES:
            vae_cfg = VaeConfig.from_dict({**base_vae, **overrides})
            stage1 = train_stage1(dataset, vae_cfg, seed)
            stage1_hash = content_hash({"label": label, "seed": seed}, {"vae": stage1.model.state_dict()})

            recon = reconstruct_motions(stage1, dataset)
            mpjpe_mm = float(np.mean([mpjpe(r, g) for r, g in zip(recon, test)]))
            recon_emb = encoders.embed_motions(_as_encoder_rep(recon))
            rfid_val = fid(real_emb, recon_emb)

            row = {
                "axis": axis,
                "label": label,
                "seed": seed,
                "checkpoint_hash": stage1_hash,
                "rfid": rfid_val,
                "mpjpe": mpjpe_mm,
                "fid": None,
                "mm_dist": None,
            }

            bundle = None
            if include_generation or (include_control and axis == "encoder_input"):
                ldm_cfg = DiffusionConfig.from_dict(base_ldm)
                stage2 = train_stage2(stage1, dataset, ldm_cfg, seed)
                bundle = InferenceBundle.from_results(stage1, stage2)

            if include_generation:
                texts = [test[i % len(test)].caption for i in range(gen_samples)]
                gen = sample_batch(bundle, texts, [seed * 1000 + i for i in range(gen_samples)])
                gen_emb = encoders.embed_motions(_as_encoder_rep(gen))
                text_emb = encoders.embed_texts(texts)
                row["fid"] = fid(real_emb, gen_emb)
                row["mm_dist"] = mm_dist(gen_emb, text_emb)

            rows.append(row)

            if include_control and axis == "encoder_input":
                specs = []
                for i in range(control_prompts):
                    m = test[i % len(test)]
                    path = path_from_motion(m, bundle.vae_cfg.seq_len)
                    specs.append(build_path_following_spec(path, m.caption or "a person walks forward", dataset.skeleton))
                gcfg = GuidanceConfig(rho=guidance_rho)
                edited, _ = guided_sample_batch(specs, [seed * 77 + i for i in range(len(specs))], gcfg, bundle)
                traj, loc, avg = control_errors(edited, specs)
                control_rows.append(
                    {"label": label, "seed": seed, "checkpoint_hash": stage1_hash,
                     "traj_err": traj, "loc_err": loc, "avg_err": avg}
                )

    report = {
        "rows": rows,
        "control_rows": control_rows,
        "evaluator_hash": encoders.checkpoint_hash,
        "dataset_seed": dataset.seed,
        "seeds": list(seeds),
        "configs": {"vae": base_vae, "ldm": base_ldm},
    }
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        atomic_write_json(os.path.join(out_dir, "report.json"), report)
        _write_csv(os.path.join(out_dir, "table_reconstruction.csv"), rows,
                   ["axis", "label", "seed", "checkpoint_hash", "rfid", "mpjpe", "fid", "mm_dist"])
        if control_rows:
            _write_csv(os.path.join(out_dir, "table_control.csv"), control_rows,
                       ["label", "seed", "checkpoint_hash", "traj_err", "loc_err", "avg_err"])
    return report


def _write_csv(path: str, rows: list[dict], fieldnames: list[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
