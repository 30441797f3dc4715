"""Multi-scale attention aggregation: fuses parallel feature maps into one.

The layer concatenates its inputs on the channel axis, reduces them with a
pointwise convolution, then gates the reduced map twice: a temporal gate
built from multi-kernel convolutions pooled across channels, and a channel
gate built from temporal mean/max pooling convolved along the channel axis.
The two gated maps are summed and restored to the output width.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
import torch.nn as nn

from .attention import conv_over_time


@dataclass(frozen=True)
class FusionConfig:
    in_channels: int
    n_inputs: int = 2
    reduced_channels: int | None = None
    out_channels: int | None = None
    kernel_sizes: tuple[int, ...] = (3, 5, 7)
    time_gate_kernel: int = 7
    channel_gate_kernel: int = 3

    def __post_init__(self):
        object.__setattr__(self, "kernel_sizes", tuple(self.kernel_sizes))
        reduced = self.reduced_channels if self.reduced_channels is not None else self.in_channels
        out = self.out_channels if self.out_channels is not None else self.in_channels
        object.__setattr__(self, "reduced_channels", int(reduced))
        object.__setattr__(self, "out_channels", int(out))
        total = self.in_channels * self.n_inputs
        # reduction (strictly fewer channels than the concat) is the intended
        # configuration; equality stays legal so a single input can pass
        # through an identity-initialized reduce conv
        if not (1 <= self.reduced_channels <= total):
            raise ValueError(
                f"reduced_channels must be in [1, {total}] for {self.n_inputs} x {self.in_channels} inputs"
            )
        for k in self.kernel_sizes + (self.time_gate_kernel, self.channel_gate_kernel):
            if k < 1 or k % 2 == 0:
                raise ValueError(f"kernel sizes must be odd, got {k}")


class MultiScaleAttentionFusion(nn.Module):
    def __init__(self, cfg: FusionConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.reduced_channels
        self.reduce = nn.Conv1d(cfg.in_channels * cfg.n_inputs, d, kernel_size=1)
        self.scale_convs = nn.ModuleList(
            nn.Conv1d(d, d, kernel_size=k, padding=k // 2) for k in cfg.kernel_sizes
        )
        self.time_gate_conv = nn.Conv1d(2, 1, cfg.time_gate_kernel, padding=cfg.time_gate_kernel // 2)
        self.channel_gate_conv1 = nn.Conv1d(2, 2, cfg.channel_gate_kernel, padding=cfg.channel_gate_kernel // 2)
        self.channel_gate_conv2 = nn.Conv1d(2, 1, cfg.channel_gate_kernel, padding=cfg.channel_gate_kernel // 2)
        self.restore = nn.Conv1d(d, cfg.out_channels, kernel_size=1)

    def reduce_concat(self, inputs: Sequence[torch.Tensor]) -> torch.Tensor:
        """Channel-concatenate the input maps and reduce to the working width."""
        if len(inputs) == 0:
            raise ValueError("need at least one input map")
        if len(inputs) != self.cfg.n_inputs:
            raise ValueError(f"expected {self.cfg.n_inputs} inputs, got {len(inputs)}")
        t = inputs[0].shape[-2]
        for x in inputs[1:]:
            if x.shape[-2] != t:
                raise ValueError(f"time length mismatch: {x.shape[-2]} vs {t}")
        stacked = torch.cat(list(inputs), dim=-1)
        return conv_over_time(self.reduce, stacked)

    def spatial_branch(self, x: torch.Tensor, force_gates: float | None = None) -> torch.Tensor:
        """Temporal gating: multi-kernel conv sum, channel pooling, sigmoid gate."""
        summed = sum(conv_over_time(conv, x) for conv in self.scale_convs)
        pooled = torch.cat(
            [summed.mean(dim=-1, keepdim=True), summed.max(dim=-1, keepdim=True).values], dim=-1
        )
        gate = torch.sigmoid(conv_over_time(self.time_gate_conv, pooled))
        if force_gates is not None:
            gate = torch.full_like(gate, force_gates)
        return gate * x

    def channel_branch(self, x: torch.Tensor, force_gates: float | None = None) -> torch.Tensor:
        """Channel gating: temporal mean/max pooling convolved along channels."""
        pooled = torch.stack([x.mean(dim=-2), x.max(dim=-2).values], dim=-2)
        hidden = self.channel_gate_conv1(pooled.reshape(-1, *pooled.shape[-2:]))
        gate = torch.sigmoid(self.channel_gate_conv2(hidden))
        gate = gate.reshape(*pooled.shape[:-2], 1, pooled.shape[-1])
        if force_gates is not None:
            gate = torch.full_like(gate, force_gates)
        return gate * x

    def forward(self, inputs: Sequence[torch.Tensor], force_gates: float | None = None) -> torch.Tensor:
        x = self.reduce_concat(inputs)
        fused = self.spatial_branch(x, force_gates) + self.channel_branch(x, force_gates)
        return conv_over_time(self.restore, fused)
