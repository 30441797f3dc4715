"""Scaled dot-product attention with linear or 1-D convolutional projections.

Tensors are laid out (..., T, C): any number of leading batch dims, time, then
channels. Queries and keys may come from a convolution over time so that each
position attends based on its local trend rather than its value alone. No
variant here takes a mask; every position may attend everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

ATTENTION_MODES = ("SELF", "CONV", "S+C", "S_C")


@dataclass(frozen=True)
class AttentionConfig:
    d_model: int
    n_heads: int
    conv_kernel: int = 3
    mode: str = "SELF"
    dropout: float = 0.0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.conv_kernel < 1 or self.conv_kernel % 2 == 0:
            raise ValueError(f"conv_kernel must be odd and >= 1, got {self.conv_kernel}")
        if self.mode not in ATTENTION_MODES:
            raise ValueError(f"mode must be one of {ATTENTION_MODES}, got {self.mode!r}")


def attention_core(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, return_weights: bool = False):
    """softmax(q k^T / sqrt(d)) v over the time axis.

    Output length follows the query count, which is how a coarse-to-fine
    length change happens, and every weight row sums to 1.
    """
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"query dim {q.shape[-1]} != key dim {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ValueError(f"key length {k.shape[-2]} != value length {v.shape[-2]}")
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = torch.matmul(q, k.transpose(-2, -1)) * scale
    weights = torch.softmax(scores, dim=-1)
    out = torch.matmul(weights, v)
    if return_weights:
        return out, weights
    return out


def conv_over_time(conv: nn.Conv1d, x: torch.Tensor) -> torch.Tensor:
    """Apply a Conv1d along the time axis of a (..., T, C) tensor."""
    lead = x.shape[:-2]
    t, c = x.shape[-2], x.shape[-1]
    flat = x.reshape(-1, t, c).transpose(1, 2)
    out = conv(flat).transpose(1, 2)
    return out.reshape(*lead, t, out.shape[-1])


class TimeLinear(nn.Module):
    """Pointwise affine projection of the channel axis."""

    def __init__(self, d_in: int, d_out: int | None = None):
        super().__init__()
        self.linear = nn.Linear(d_in, d_out if d_out is not None else d_in)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.linear.in_features:
            raise ValueError(f"expected {self.linear.in_features} channels, got {x.shape[-1]}")
        return self.linear(x)


class TimeConv(nn.Module):
    """Same-padded 1-D convolution along time; extracts local trends for Q/K."""

    def __init__(self, d_model: int, kernel: int = 3):
        super().__init__()
        self.conv = nn.Conv1d(d_model, d_model, kernel_size=kernel, padding=kernel // 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.conv.in_channels:
            raise ValueError(f"expected {self.conv.in_channels} channels, got {x.shape[-1]}")
        return conv_over_time(self.conv, x)


def _split_heads(x: torch.Tensor, n_heads: int) -> torch.Tensor:
    """(..., T, d_model) -> (..., heads, T, d_head)."""
    lead = x.shape[:-2]
    t, d = x.shape[-2], x.shape[-1]
    return x.reshape(*lead, t, n_heads, d // n_heads).transpose(-3, -2)


def _merge_heads(x: torch.Tensor) -> torch.Tensor:
    """(..., heads, T, d_head) -> (..., T, d_model)."""
    lead = x.shape[:-3]
    h, t, dh = x.shape[-3], x.shape[-2], x.shape[-1]
    return x.transpose(-3, -2).reshape(*lead, t, h * dh)


class MultiHeadAttention(nn.Module):
    """Multi-head attention whose Q/K projections follow the configured mode.

    SELF uses affine projections throughout; CONV swaps the query and key
    projections for same-padded 1-D convolutions while values stay linear,
    so the attention pattern reacts to local trends but content is untouched.
    """

    def __init__(self, cfg: AttentionConfig):
        super().__init__()
        self.cfg = cfg
        if cfg.mode == "CONV":
            self.query_proj = TimeConv(cfg.d_model, cfg.conv_kernel)
            self.key_proj = TimeConv(cfg.d_model, cfg.conv_kernel)
        else:
            self.query_proj = TimeLinear(cfg.d_model)
            self.key_proj = TimeLinear(cfg.d_model)
        self.value_proj = TimeLinear(cfg.d_model)
        self.out_proj = TimeLinear(cfg.d_model)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, x_q: torch.Tensor, x_kv: torch.Tensor, return_weights: bool = False):
        if x_q.shape[-1] != self.cfg.d_model or x_kv.shape[-1] != self.cfg.d_model:
            raise ValueError(
                f"inputs must have {self.cfg.d_model} channels, got {x_q.shape[-1]} / {x_kv.shape[-1]}"
            )
        q = _split_heads(self.query_proj(x_q), self.cfg.n_heads)
        k = _split_heads(self.key_proj(x_kv), self.cfg.n_heads)
        v = _split_heads(self.value_proj(x_kv), self.cfg.n_heads)
        out, weights = attention_core(q, k, v, return_weights=True)
        out = self.out_proj(_merge_heads(self.dropout(out)))
        if return_weights:
            return out, weights
        return out
