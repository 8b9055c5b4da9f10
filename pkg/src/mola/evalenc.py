"""Locally trained contrastive motion/text encoders backing the metric suite."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .checkpoint import content_hash
from .data import MAX_FRAMES, DatasetSplit, caption_vocabulary
from .features import FeatureStats, MotionSequence
from .motionfile import atomic_write_json
from .skeleton import SkeletonSpec
from .text import PAD, Tokenizer
from .train_vae import TrainingDivergedError, _iter_rng


class MotionEvalNet(nn.Module):
    def __init__(self, in_dim: int, d_e: int, width: int = 96):
        super().__init__()
        self.conv1 = nn.Conv1d(in_dim, width, 4, stride=2, padding=1)
        self.conv2 = nn.Conv1d(width, width, 4, stride=2, padding=1)
        self.conv3 = nn.Conv1d(width, width, 3, padding=1)
        self.out = nn.Linear(width, d_e)

    def forward(self, x: torch.Tensor, active: torch.Tensor) -> torch.Tensor:
        """x: (batch, channels, frames); active: (batch, frames) in {0,1}."""
        h = F.leaky_relu(self.conv1(x), 0.2)
        h = F.leaky_relu(self.conv2(h), 0.2)
        h = F.leaky_relu(self.conv3(h), 0.2)
        m = F.max_pool1d(active.unsqueeze(1), 4, 4).squeeze(1)  # frames downsampled by 4
        m = m[:, : h.shape[2]]
        pooled = (h * m.unsqueeze(1)).sum(dim=2) / m.sum(dim=1, keepdim=True).clamp(min=1.0)
        return self.out(pooled)


class TextEvalNet(nn.Module):
    def __init__(self, vocab_size: int, d_e: int, width: int = 96):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, width, padding_idx=PAD)
        self.mlp = nn.Sequential(nn.Linear(width, width), nn.ReLU(), nn.Linear(width, d_e))

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        keep = (ids != PAD).float().unsqueeze(-1)
        pooled = (self.embed(ids) * keep).sum(dim=1) / keep.sum(dim=1).clamp(min=1.0)
        return self.mlp(pooled)


@dataclass
class EvalEncoders:
    motion_net: MotionEvalNet
    text_net: TextEvalNet
    tokenizer: Tokenizer
    stats: FeatureStats
    skeleton: SkeletonSpec
    d_e: int
    max_tokens: int
    checkpoint_hash: str

    def _batch(self, motions: list[MotionSequence]) -> tuple[torch.Tensor, torch.Tensor]:
        dim = self.stats.dim
        out = np.zeros((len(motions), MAX_FRAMES, dim), dtype=np.float32)
        active = np.zeros((len(motions), MAX_FRAMES), dtype=np.float32)
        for i, m in enumerate(motions):
            n = min(m.length, MAX_FRAMES)
            out[i, :n] = (m.features[:n] - self.stats.mean) / self.stats.std
            active[i, :n] = 1.0
        return torch.from_numpy(out).transpose(1, 2).contiguous(), torch.from_numpy(active)

    @torch.no_grad()
    def embed_motions(self, motions: list[MotionSequence], batch: int = 128) -> np.ndarray:
        self.motion_net.eval()
        chunks = []
        for s in range(0, len(motions), batch):
            x, active = self._batch(motions[s : s + batch])
            chunks.append(self.motion_net(x, active).numpy())
        return np.concatenate(chunks, axis=0)

    @torch.no_grad()
    def embed_texts(self, texts: list[str], batch: int = 256) -> np.ndarray:
        self.text_net.eval()
        chunks = []
        for s in range(0, len(texts), batch):
            ids = self.tokenizer.batch_encode(texts[s : s + batch], self.max_tokens)
            chunks.append(self.text_net(ids).numpy())
        return np.concatenate(chunks, axis=0)

    def save(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        atomic_write_json(
            os.path.join(out_dir, "meta.json"),
            {
                "kind": "evaluators",
                "d_e": self.d_e,
                "max_tokens": self.max_tokens,
                "stats": self.stats.to_dict(),
                "skeleton": self.skeleton.to_dict(),
                "vocab": self.tokenizer.vocab,
                "hash": self.checkpoint_hash,
            },
        )
        torch.save(
            {"motion": self.motion_net.state_dict(), "text": self.text_net.state_dict()},
            os.path.join(out_dir, "weights.pt"),
        )

    @staticmethod
    def load(path: str) -> "EvalEncoders":
        import json

        with open(os.path.join(path, "meta.json"), encoding="utf-8") as fh:
            meta = json.load(fh)
        stats = FeatureStats.from_dict(meta["stats"])
        skeleton = SkeletonSpec.from_dict(meta["skeleton"])
        tokenizer = Tokenizer(meta["vocab"])
        weights = torch.load(os.path.join(path, "weights.pt"), map_location="cpu", weights_only=False)
        motion_net = MotionEvalNet(stats.dim, meta["d_e"])
        motion_net.load_state_dict(weights["motion"])
        motion_net.eval()
        text_net = TextEvalNet(tokenizer.size, meta["d_e"])
        text_net.load_state_dict(weights["text"])
        text_net.eval()
        return EvalEncoders(motion_net, text_net, tokenizer, stats, skeleton, meta["d_e"], meta["max_tokens"], meta["hash"])


def train_eval_encoders(
    dataset: DatasetSplit,
    seed: int,
    d_e: int = 64,
    iters: int = 400,
    batch_size: int = 64,
    lr: float = 1e-3,
    max_tokens: int = 16,
) -> EvalEncoders:
    """Symmetric contrastive training on (motion, caption) pairs; frozen after."""
    tokenizer = Tokenizer(caption_vocabulary())
    torch.manual_seed(seed + 17)
    motion_net = MotionEvalNet(dataset.stats.dim, d_e)
    text_net = TextEvalNet(tokenizer.size, d_e)
    enc = EvalEncoders(motion_net, text_net, tokenizer, dataset.stats, dataset.skeleton, d_e, max_tokens, "")

    motions = dataset.train
    captions = [m.caption for m in motions]
    opt = torch.optim.Adam(list(motion_net.parameters()) + list(text_net.parameters()), lr=lr)
    tau = 0.1

    motion_net.train()
    text_net.train()
    for it in range(iters):
        rng = _iter_rng(seed, it)
        idx = rng.integers(0, len(motions), size=batch_size)
        x, active = enc._batch([motions[i] for i in idx])
        ids = tokenizer.batch_encode([captions[i] for i in idx], max_tokens)
        em = motion_net(x, active)
        et = text_net(ids)
        logits = -torch.cdist(em, et).pow(2) / tau
        labels = torch.arange(batch_size)
        loss = 0.5 * (F.cross_entropy(logits, labels) + F.cross_entropy(logits.t(), labels))
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        if not torch.isfinite(loss):
            raise TrainingDivergedError(f"evaluator training diverged at iter {it}")

    motion_net.eval()
    text_net.eval()
    enc.checkpoint_hash = content_hash(
        {"d_e": d_e, "seed": seed}, {"motion": motion_net.state_dict(), "text": text_net.state_dict()}
    )
    return enc
