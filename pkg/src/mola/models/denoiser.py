"""Transformer noise predictor for the latent diffusion stage.

Latent channels map through a linear layer into the model width; the
timestep embedding and the text-conditioning vector are prepended as two
extra tokens.  Blocks are pre-layer-norm attention plus a gated MLP, each
with a skip connection.  The output projection is zero-initialized so the
model predicts zero noise at initialization.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def timestep_embedding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(max_period) * torch.arange(half, dtype=torch.float32, device=t.device) / half)
    args = t.float()[:, None] * freqs[None, :]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class GatedMlp(nn.Module):
    def __init__(self, d_model: int, expand: int = 4):
        super().__init__()
        self.fc = nn.Linear(d_model, 2 * expand * d_model)
        self.out = nn.Linear(expand * d_model, d_model)

    def forward(self, x):
        a, b = self.fc(x).chunk(2, dim=-1)
        return self.out(a * F.gelu(b))


class Block(nn.Module):
    def __init__(self, d_model: int, n_heads: int, mlp_expand: int = 4):
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.attn = nn.MultiheadAttention(d_model, n_heads, batch_first=True)
        self.norm2 = nn.LayerNorm(d_model)
        self.mlp = GatedMlp(d_model, mlp_expand)

    def forward(self, x):
        h = self.norm1(x)
        x = x + self.attn(h, h, h, need_weights=False)[0]
        x = x + self.mlp(self.norm2(x))
        return x


class Denoiser(nn.Module):
    def __init__(self, d_z: int, d_l: int, d_cond: int, d_model: int = 256, n_blocks: int = 4, n_heads: int = 4,
                 mlp_expand: int = 4):
        super().__init__()
        self.d_z = d_z
        self.d_l = d_l
        self.proj_in = nn.Linear(d_z, d_model)
        self.pos = nn.Parameter(torch.zeros(d_l, d_model))
        self.time_mlp = nn.Sequential(nn.Linear(d_model, d_model), nn.SiLU(), nn.Linear(d_model, d_model))
        self.cond_proj = nn.Linear(d_cond, d_model)
        self.blocks = nn.ModuleList(Block(d_model, n_heads, mlp_expand) for _ in range(n_blocks))
        self.norm = nn.LayerNorm(d_model)
        self.proj_out = nn.Linear(d_model, d_z)
        nn.init.zeros_(self.proj_out.weight)
        nn.init.zeros_(self.proj_out.bias)

    def forward(self, z_t: torch.Tensor, t: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        """z_t (batch, d_z, d_l), t (batch,) int, cond (batch, d_cond) -> noise estimate."""
        if z_t.shape[1] != self.d_z:
            raise ValueError(f"expected {self.d_z} latent channels, got {z_t.shape[1]}")
        x = self.proj_in(z_t.transpose(1, 2)) + self.pos[: z_t.shape[2]]
        t_tok = self.time_mlp(timestep_embedding(t, x.shape[-1])).unsqueeze(1)
        c_tok = self.cond_proj(cond).unsqueeze(1)
        x = torch.cat([t_tok, c_tok, x], dim=1)
        for block in self.blocks:
            x = block(x)
        x = self.norm(x[:, 2:])
        return self.proj_out(x).transpose(1, 2)
