"""Evaluation metrics: retrieval precision, Fréchet distance, diversity,
length-distribution divergences, control errors and reconstruction error."""

from __future__ import annotations

import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .editing import EditSpec
from .features import MotionSequence, recover_global_joints


class MetricError(ValueError):
    pass


# ---------------------------------------------------------------- distributions


def _sym_sqrt_trace(cov_a: np.ndarray, cov_b: np.ndarray) -> float:
    """tr((cov_a cov_b)^{1/2}) via eigen-decomposition of the symmetrized product."""
    vals_a, vecs_a = np.linalg.eigh(cov_a)
    if vals_a.min() < -1e-6:
        raise MetricError(f"covariance has negative eigenvalue {vals_a.min():.3g}")
    root_a = (vecs_a * np.sqrt(np.clip(vals_a, 0.0, None))) @ vecs_a.T
    inner = root_a @ cov_b @ root_a
    inner = 0.5 * (inner + inner.T)
    vals = np.linalg.eigvalsh(inner)
    if vals.min() < -1e-6:
        raise MetricError(f"symmetrized product has negative eigenvalue {vals.min():.3g}")
    return float(np.sqrt(np.clip(vals, 0.0, None)).sum())


def fid(real_features: np.ndarray, gen_features: np.ndarray) -> float:
    """Fréchet distance between Gaussian fits of the two feature sets."""
    a = np.asarray(real_features, dtype=np.float64)
    b = np.asarray(gen_features, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise MetricError("feature sets must be 2-D with equal dims")
    d = a.shape[1]
    if len(a) < d + 1 or len(b) < d + 1:
        raise MetricError(f"need at least dim+1 = {d + 1} samples per side")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False)
    cov_b = np.cov(b, rowvar=False)
    diff = mu_a - mu_b
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * _sym_sqrt_trace(cov_a, cov_b))


def r_precision(
    gen_features: np.ndarray,
    text_features: np.ndarray,
    pool: int = 32,
    ks: tuple[int, ...] = (1, 2, 3),
    rng: np.random.Generator | None = None,
    caption_ids: list | None = None,
    candidate_features: np.ndarray | None = None,
    candidate_ids: list | None = None,
) -> dict[int, float]:
    """Retrieval accuracy against one true and pool-1 mismatched descriptions.

    By default mismatched candidates are the other rows of
    ``text_features``.  With a small closed caption set, pass
    ``candidate_features``/``candidate_ids`` (one row per distinct caption)
    plus per-sample ``caption_ids`` so a "mismatch" is never a
    text-identical caption.
    """
    gen = np.asarray(gen_features, dtype=np.float64)
    text = np.asarray(text_features, dtype=np.float64)
    n = len(gen)
    if candidate_features is None and n < pool:
        raise MetricError(f"need at least {pool} samples")
    rng = rng or np.random.default_rng(0)
    hits = {k: 0 for k in ks}
    for i in range(n):
        if candidate_features is not None:
            if caption_ids is None or candidate_ids is None:
                raise MetricError("candidate pool requires caption_ids and candidate_ids")
            cand_pool = np.asarray(candidate_features, dtype=np.float64)
            others = np.flatnonzero(np.asarray([cid != caption_ids[i] for cid in candidate_ids]))
        elif caption_ids is not None:
            cand_pool = text
            others = np.flatnonzero(np.asarray([cid != caption_ids[i] for cid in caption_ids]))
        else:
            cand_pool = text
            others = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        if len(others) < pool - 1:
            raise MetricError("not enough mismatched captions in the pool")
        cand = rng.choice(others, size=pool - 1, replace=False)
        dists_mismatch = np.linalg.norm(cand_pool[cand] - gen[i], axis=1)
        d_true = float(np.linalg.norm(text[i] - gen[i]))
        rank = 1 + int((dists_mismatch < d_true).sum())
        for k in ks:
            if rank <= k:
                hits[k] += 1
    return {k: hits[k] / n for k in ks}


def mm_dist(gen_features: np.ndarray, text_features: np.ndarray, squared: bool = False) -> float:
    """Mean distance between each motion feature and its own text feature."""
    gen = np.asarray(gen_features, dtype=np.float64)
    text = np.asarray(text_features, dtype=np.float64)
    if gen.shape != text.shape:
        raise MetricError("paired feature sets must share a shape")
    d = np.linalg.norm(gen - text, axis=1)
    return float((d**2 if squared else d).mean())


def diversity(gen_features: np.ndarray, subset_size: int = 300, rng: np.random.Generator | None = None,
              squared: bool = False) -> float:
    """Mean distance between two disjoint random subsets of the features."""
    feats = np.asarray(gen_features, dtype=np.float64)
    rng = rng or np.random.default_rng(0)
    s = subset_size
    if len(feats) < 2 * s:
        s = len(feats) // 2
        if s == 0:
            raise MetricError("need at least 2 samples")
        import warnings

        warnings.warn(f"diversity subset shrunk to {s} (only {len(feats)} samples)")
    idx = rng.permutation(len(feats))[: 2 * s]
    d = np.linalg.norm(feats[idx[:s]] - feats[idx[s:]], axis=1)
    return float((d**2 if squared else d).mean())


def mmodality(per_caption_features: dict[str, np.ndarray], repeats: int = 10,
              rng: np.random.Generator | None = None, squared: bool = False) -> float:
    """Within-caption spread: paired subset distances averaged over captions."""
    rng = rng or np.random.default_rng(0)
    dists = []
    for caption in sorted(per_caption_features):
        feats = np.asarray(per_caption_features[caption], dtype=np.float64)
        if len(feats) < 2 * repeats:
            raise MetricError(f"caption {caption!r} needs at least {2 * repeats} generations")
        idx = rng.permutation(len(feats))[: 2 * repeats]
        d = np.linalg.norm(feats[idx[:repeats]] - feats[idx[repeats:]], axis=1)
        dists.append(d**2 if squared else d)
    if not dists:
        raise MetricError("no captions given")
    return float(np.concatenate(dists).mean())


def length_histogram(lengths: np.ndarray, bins: np.ndarray) -> np.ndarray:
    hist, _ = np.histogram(np.asarray(lengths), bins=bins)
    total = hist.sum()
    if total == 0:
        raise MetricError("no lengths in histogram range")
    return hist / total


def default_length_bins() -> np.ndarray:
    return np.arange(24, 201, 4, dtype=np.float64)


def jensen_shannon(p: np.ndarray, q: np.ndarray) -> float:
    """Base-2 JSD between two histograms (0 log 0 taken as 0)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)

    def kl(a, b):
        mask = a > 0
        return float((a[mask] * np.log2(a[mask] / b[mask])).sum())

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def wasserstein_1d(a: np.ndarray, b: np.ndarray) -> float:
    """Exact 1-D earth mover's distance between two empirical samples."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    values = np.concatenate([a, b])
    values.sort(kind="mergesort")
    deltas = np.diff(values)
    cdf_a = np.searchsorted(a, values[:-1], side="right") / len(a)
    cdf_b = np.searchsorted(b, values[:-1], side="right") / len(b)
    return float(np.sum(np.abs(cdf_a - cdf_b) * deltas))


def length_distribution_report(
    gen_lengths: np.ndarray,
    real_lengths: np.ndarray,
    bins: np.ndarray | None = None,
) -> tuple[float, float]:
    """(JSD over shared histogram bins, EMD in frames)."""
    bins = default_length_bins() if bins is None else np.asarray(bins, dtype=np.float64)
    p = length_histogram(gen_lengths, bins)
    q = length_histogram(real_lengths, bins)
    return jensen_shannon(p, q), wasserstein_1d(gen_lengths, real_lengths)


# ---------------------------------------------------------------- motion errors


def control_errors(
    gen_motions: list[MotionSequence],
    specs: list[EditSpec],
    thresh: float = 0.5,
) -> tuple[float, float, float]:
    """(traj_err, loc_err, avg_err) over masked control entries.

    avg_err: mean Euclidean error over all masked entries; loc_err: the
    fraction of masked entries whose error exceeds ``thresh``; traj_err:
    the fraction of motions whose worst masked entry exceeds ``thresh``.
    Masked frames beyond a motion's generated length are skipped.
    """
    if len(gen_motions) != len(specs) or not gen_motions:
        raise MetricError("need matching non-empty motion/spec lists")
    entry_errors = []
    traj_fail = 0
    for motion, spec in zip(gen_motions, specs):
        frames = min(motion.length, spec.n_frames)
        joints = recover_global_joints(motion.features[:frames], spec.n_joints)
        mask = spec.mask[:, :frames].astype(bool)
        diff = joints.transpose(1, 0, 2) - spec.targets[:, :frames]  # (joints, frames, 3)
        errs = np.linalg.norm(diff, axis=-1)[mask]
        if errs.size == 0:
            raise MetricError("a spec has no masked entries within the generated length")
        entry_errors.append(errs)
        if errs.max() > thresh:
            traj_fail += 1
    all_errors = np.concatenate(entry_errors)
    return (
        traj_fail / len(gen_motions),
        float((all_errors > thresh).mean()),
        float(all_errors.mean()),
    )


def mpjpe(recon_motion: MotionSequence, gt_motion: MotionSequence) -> float:
    """Mean per-joint position error in millimeters over shared active frames."""
    n = min(recon_motion.length, gt_motion.length)
    nj = recon_motion.skeleton.n_joints
    a = recover_global_joints(recon_motion.features[:n], nj)
    b = recover_global_joints(gt_motion.features[:n], nj)
    return float(np.linalg.norm(a - b, axis=-1).mean() * 1000.0)


def rfid(recon_features: np.ndarray, real_features: np.ndarray) -> float:
    """FID between embedded reconstructions and embedded real motions."""
    return fid(real_features, recon_features)


# ---------------------------------------------------------------- timing


@dataclass
class AitsResult:
    seconds: float
    n: int
    hardware: str


def aits(sampler, prompts: list[str], n: int) -> AitsResult:
    """Mean wall-clock seconds per prompt, warm-started."""
    if n <= 0:
        raise MetricError("need n >= 1 prompts to time")
    if not prompts:
        raise MetricError("prompt list is empty")
    sampler(prompts[0])  # warm-up excluded from timing
    start = time.perf_counter()
    for i in range(n):
        sampler(prompts[i % len(prompts)])
    elapsed = (time.perf_counter() - start) / n
    return AitsResult(elapsed, n, hardware_string())


def hardware_string() -> str:
    import torch

    return f"{platform.platform()} | {platform.processor() or 'cpu'} | torch {torch.__version__} ({torch.get_num_threads()} threads)"


# ---------------------------------------------------------------- report


@dataclass
class MetricsReport:
    """Full evaluation summary; absolute values depend on the locally trained
    evaluators, so every report pins the evaluator checkpoint hash."""

    r_precision_top1: float | None = None
    r_precision_top2: float | None = None
    r_precision_top3: float | None = None
    fid: float | None = None
    rfid: float | None = None
    mm_dist: float | None = None
    diversity: float | None = None
    mmodality: float | None = None
    mpjpe_mm: float | None = None
    jsd: float | None = None
    emd_frames: float | None = None
    traj_err: float | None = None
    loc_err: float | None = None
    avg_err: float | None = None
    aits_seconds: float | None = None
    evaluator_hash: str | None = None
    checkpoint_id: str | None = None
    seed: int | None = None
    hardware: str = field(default_factory=hardware_string)
    note: str = (
        "Metrics computed with locally trained evaluators; absolute values are "
        "not comparable across evaluator checkpoints."
    )

    def to_dict(self) -> dict:
        return asdict(self)
