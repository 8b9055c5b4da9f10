"""Full evaluation of a serving bundle against a dataset split."""

from __future__ import annotations

import numpy as np

from .ablation import _as_encoder_rep, reconstruct_motions
from .data import DatasetSplit
from .editing import GuidanceConfig, build_path_following_spec, guided_sample_batch, path_from_motion
from .evalenc import EvalEncoders, train_eval_encoders
from .metrics import (
    MetricsReport,
    aits,
    control_errors,
    diversity,
    fid,
    length_distribution_report,
    mm_dist,
    mpjpe,
    r_precision,
)
from .sampling import InferenceBundle, sample_batch, sample_text_to_motion
from .train_vae import Stage1Result


def evaluate_bundle(
    bundle: InferenceBundle,
    dataset: DatasetSplit,
    seed: int = 0,
    n_samples: int = 64,
    mm_captions: int = 4,
    mm_repeats: int = 5,
    eval_iters: int = 300,
    aits_n: int = 0,
    control_prompts: int = 8,
    guidance_rho: float = 0.1,
    which: str = "all",
    encoders: EvalEncoders | None = None,
) -> MetricsReport:
    """Generation, reconstruction, length-distribution and control metrics."""
    wanted = {w.strip() for w in which.split(",")} if which != "all" else {"all"}

    def want(name: str) -> bool:
        return "all" in wanted or name in wanted

    if encoders is None:
        encoders = train_eval_encoders(dataset, seed=seed, iters=eval_iters)
    report = MetricsReport(evaluator_hash=encoders.checkpoint_hash, checkpoint_id=bundle.checkpoint_id, seed=seed)

    test = dataset.test
    real_emb = encoders.embed_motions(test)
    rng = np.random.default_rng(seed)

    if want("generation"):
        texts = [test[i % len(test)].caption for i in range(n_samples)]
        gen = sample_batch(bundle, texts, [seed * 10_000 + i for i in range(n_samples)])
        gen_emb = encoders.embed_motions(_as_encoder_rep(gen))
        text_emb = encoders.embed_texts(texts)
        report.fid = fid(real_emb, gen_emb)
        report.mm_dist = mm_dist(gen_emb, text_emb)
        report.diversity = diversity(gen_emb, rng=rng)
        distinct = sorted({m.caption for block in (dataset.train, dataset.val, dataset.test) for m in block})
        if len(distinct) >= 32:
            cand_emb = encoders.embed_texts(distinct)
            rates = r_precision(
                gen_emb, text_emb, rng=rng, caption_ids=texts,
                candidate_features=cand_emb, candidate_ids=distinct,
            )
            report.r_precision_top1 = rates[1]
            report.r_precision_top2 = rates[2]
            report.r_precision_top3 = rates[3]
        gen_lengths = np.array([m.length for m in gen])
        real_lengths = np.array([m.length for m in test])
        report.jsd, report.emd_frames = length_distribution_report(gen_lengths, real_lengths)

    if want("mmodality"):
        captions = sorted({m.caption for m in test})[:mm_captions]
        per_caption = {}
        for k, caption in enumerate(captions):
            reps = sample_batch(
                bundle, [caption] * (2 * mm_repeats), [seed * 777 + k * 100 + i for i in range(2 * mm_repeats)]
            )
            per_caption[caption] = encoders.embed_motions(_as_encoder_rep(reps))
        from .metrics import mmodality as mmodality_fn

        report.mmodality = mmodality_fn(per_caption, repeats=mm_repeats, rng=rng)

    if want("reconstruction"):
        stage1 = Stage1Result(bundle.vae, None, bundle.vae_cfg, bundle.stats, bundle.skeleton, seed)
        recon = reconstruct_motions(stage1, dataset)
        report.mpjpe_mm = float(np.mean([mpjpe(r, g) for r, g in zip(recon, test)]))
        recon_emb = encoders.embed_motions(_as_encoder_rep(recon))
        report.rfid = fid(real_emb, recon_emb)

    if want("control") and control_prompts > 0:
        specs = []
        for i in range(control_prompts):
            m = test[i % len(test)]
            specs.append(
                build_path_following_spec(
                    path_from_motion(m, bundle.vae_cfg.seq_len), m.caption or "a person walks forward",
                    dataset.skeleton,
                )
            )
        edited, _ = guided_sample_batch(
            specs, [seed * 31 + i for i in range(len(specs))], GuidanceConfig(rho=guidance_rho), bundle
        )
        report.traj_err, report.loc_err, report.avg_err = control_errors(edited, specs)

    if aits_n > 0:
        prompts = [m.caption for m in test[: max(1, min(8, len(test)))]]
        result = aits(lambda text: sample_text_to_motion(text, seed, bundle), prompts, aits_n)
        report.aits_seconds = result.seconds

    return report
