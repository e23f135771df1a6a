"""Transformer building blocks shared by the brain encoder, the language model and the querying transformer."""
import math as _math

import numpy as _np
import torch
from torch import nn


def sincos_position_embedding(length, dim):
    """Fixed 1-D sine-cosine position embedding of shape (length, dim)."""
    if dim % 2:
        raise ValueError(f'dim must be even, not {dim}.')
    omega = _np.arange(dim // 2, dtype=_np.float64) / (dim / 2.)
    omega = 1. / 10000 ** omega
    positions = _np.arange(length, dtype=_np.float64)
    out = _np.einsum('m,d->md', positions, omega)
    return _np.concatenate([_np.sin(out), _np.cos(out)], axis=1)


def timestep_embedding(t, dim):
    """Sinusoidal embedding of (possibly fractional) diffusion time steps, shape (len(t), dim)."""
    half = dim // 2
    freqs = torch.exp(-_math.log(10000.) * torch.arange(half, dtype=t.dtype, device=t.device) / half)
    args = t[:, None] * freqs[None]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class Attention(nn.Module):
    """Multi-head attention, self or cross depending on whether a context is given."""

    def __init__(self, dim, heads, context_dim=None):
        super().__init__()
        if dim % heads:
            raise ValueError(f'dim {dim} is not divisible by heads {heads}.')
        context_dim = dim if context_dim is None else context_dim
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.q = nn.Linear(dim, dim)
        self.kv = nn.Linear(context_dim, 2 * dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x, context=None, causal=False, key_mask=None):
        context = x if context is None else context
        batch, length, dim = x.shape
        q = self.q(x).reshape(batch, length, self.heads, -1).transpose(1, 2)
        k, v = self.kv(context).reshape(batch, context.shape[1], 2, self.heads, -1).permute(2, 0, 3, 1, 4)
        scores = (q @ k.transpose(-2, -1)) * self.scale
        if causal:
            allowed = torch.ones(length, context.shape[1], dtype=torch.bool, device=x.device).tril()
            scores = scores.masked_fill(~allowed, float('-inf'))
        if key_mask is not None:
            scores = scores.masked_fill(~key_mask[:, None, None, :], float('-inf'))
        weights = scores.softmax(dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(batch, length, dim)
        return self.proj(out)


class Mlp(nn.Module):

    def __init__(self, dim, ratio=4.):
        super().__init__()
        hidden = int(dim * ratio)
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class Block(nn.Module):
    """Pre-norm transformer block: self-attention then MLP, both residual."""

    def __init__(self, dim, heads, mlp_ratio=4.):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, mlp_ratio)

    def forward(self, x, causal=False):
        x = x + self.attn(self.norm1(x), causal=causal)
        return x + self.mlp(self.norm2(x))


class CrossBlock(nn.Module):
    """Pre-norm block with self-attention, cross-attention to a context sequence, then MLP."""

    def __init__(self, dim, heads, context_dim=None, mlp_ratio=4.):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)
        self.norm_cross = nn.LayerNorm(dim)
        self.cross = Attention(dim, heads, context_dim=context_dim)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, mlp_ratio)

    def forward(self, x, context, key_mask=None):
        x = x + self.attn(self.norm1(x))
        x = x + self.cross(self.norm_cross(x), context=context, key_mask=key_mask)
        return x + self.mlp(self.norm2(x))


def init_weights(module):
    if isinstance(module, nn.Linear):
        nn.init.xavier_uniform_(module.weight)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.LayerNorm):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)
