"""Closed-vocabulary tokenizer and the small trained text encoder."""

from __future__ import annotations

import torch
import torch.nn as nn


class TokenizerError(ValueError):
    """Raised when a caption contains tokens outside the closed vocabulary."""


PAD = 0


class Tokenizer:
    def __init__(self, vocab: list[str]):
        self.vocab = list(vocab)
        self.index = {w: i + 1 for i, w in enumerate(self.vocab)}  # 0 is padding

    @property
    def size(self) -> int:
        return len(self.vocab) + 1

    def encode(self, text: str, max_tokens: int) -> list[int]:
        words = text.lower().split()
        if not words:
            raise TokenizerError("empty caption")
        ids = []
        for w in words:
            if w not in self.index:
                raise TokenizerError(f"unknown token {w!r}")
            ids.append(self.index[w])
        if len(ids) > max_tokens:
            raise TokenizerError(f"caption longer than {max_tokens} tokens")
        return ids + [PAD] * (max_tokens - len(ids))

    def batch_encode(self, texts: list[str], max_tokens: int) -> torch.Tensor:
        return torch.tensor([self.encode(t, max_tokens) for t in texts], dtype=torch.long)


class TextEncoder(nn.Module):
    """Token embeddings + a small transformer pooled into a conditioning vector.

    Also owns the learned null embedding used for classifier-free guidance.
    """

    def __init__(self, vocab: list[str], d_cond: int = 128, n_layers: int = 2, max_tokens: int = 16, d_model: int = 128):
        super().__init__()
        self.tokenizer = Tokenizer(vocab)
        self.max_tokens = max_tokens
        self.embed = nn.Embedding(self.tokenizer.size, d_model, padding_idx=PAD)
        self.pos = nn.Parameter(torch.zeros(max_tokens, d_model))
        layer = nn.TransformerEncoderLayer(
            d_model=d_model, nhead=4, dim_feedforward=4 * d_model, dropout=0.0,
            batch_first=True, norm_first=True,
        )
        self.blocks = nn.TransformerEncoder(layer, num_layers=n_layers, enable_nested_tensor=False)
        self.out = nn.Linear(d_model, d_cond)
        self.null_embedding = nn.Parameter(torch.randn(d_cond) * 0.02)

    def forward(self, token_ids: torch.Tensor) -> torch.Tensor:
        mask = token_ids == PAD
        x = self.embed(token_ids) + self.pos[: token_ids.shape[1]]
        x = self.blocks(x, src_key_padding_mask=mask)
        keep = (~mask).float().unsqueeze(-1)
        pooled = (x * keep).sum(dim=1) / keep.sum(dim=1).clamp(min=1.0)
        return self.out(pooled)

    def encode_texts(self, texts: list[str]) -> torch.Tensor:
        ids = self.tokenizer.batch_encode(texts, self.max_tokens)
        return self(ids)

    def null(self, batch: int) -> torch.Tensor:
        return self.null_embedding.unsqueeze(0).expand(batch, -1)
