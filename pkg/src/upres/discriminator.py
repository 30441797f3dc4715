"""Length-invariant feature-space discriminator.

A stack of circularly padded 1-D convolutions turns a series of any length
into a (T x C) feature map; pooling that map to per-channel mean and standard
deviation removes the time axis entirely, so the classifier head can never
key on sequence length. Circular padding makes the features of a series tiled
twice exactly the tiling of its own features, which in turn makes the score
of a self-concatenated series identical to the original's.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DataError
from .series import TimeSeries


@dataclass(frozen=True)
class DiscriminatorConfig:
    channels: tuple[int, ...] = (16, 32, 64)
    kernel: int = 5
    head_hidden: int = 64
    feature_taps: tuple[int, ...] = (-1,)
    leak: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "feature_taps", tuple(self.feature_taps))
        if len(self.channels) < 1:
            raise ValueError("need at least one conv block")
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise ValueError(f"kernel must be odd, got {self.kernel}")
        n = len(self.channels)
        for tap in self.feature_taps:
            if not (-n <= tap < n):
                raise ValueError(f"feature tap {tap} out of range for {n} blocks")


def smooth_leaky(x: torch.Tensor, negative_slope: float = 0.1) -> torch.Tensor:
    """Softplus-based leaky unit: slope `negative_slope` at -inf, 1 at +inf, f(0)=0."""
    return negative_slope * x + (1.0 - negative_slope) * (F.softplus(x) - math.log(2.0))


@dataclass(frozen=True)
class FeatureStats:
    """Per-channel temporal mean and population standard deviation."""

    mean: torch.Tensor
    std: torch.Tensor

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise DataError(f"stat shape mismatch: {self.mean.shape} vs {self.std.shape}")


def feature_stats(feature_map: torch.Tensor) -> FeatureStats:
    """Pool a (..., T, C) map over time into (..., C) mean and std."""
    mean = feature_map.mean(dim=-2)
    std = feature_map.var(dim=-2, unbiased=False).clamp_min(0.0).sqrt()
    return FeatureStats(mean=mean, std=std)


class Discriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        blocks = []
        c_in = 1
        for c_out in cfg.channels:
            blocks.append(
                nn.Conv1d(c_in, c_out, cfg.kernel, padding=cfg.kernel // 2, padding_mode="circular")
            )
            c_in = c_out
        self.blocks = nn.ModuleList(blocks)
        self.head = nn.Sequential(
            nn.Linear(2 * cfg.channels[-1], cfg.head_hidden),
            nn.GELU(),
            nn.Linear(cfg.head_hidden, 1),
        )

    def _check_length(self, x: torch.Tensor) -> None:
        if x.shape[-1] < self.cfg.kernel:
            raise DataError(f"series of {x.shape[-1]} samples shorter than kernel {self.cfg.kernel}")

    def feature_maps(self, x: torch.Tensor) -> list[torch.Tensor]:
        """All block outputs, each (..., T, C_block), for any input length."""
        self._check_length(x)
        lead = x.shape[:-1]
        h = x.reshape(-1, 1, x.shape[-1])
        maps = []
        for conv in self.blocks:
            h = smooth_leaky(conv(h), self.cfg.leak)
            time_major = h.transpose(1, 2)
            maps.append(time_major.reshape(*lead, time_major.shape[-2], time_major.shape[-1]))
        return maps

    def extract_features(self, x: torch.Tensor) -> torch.Tensor:
        """Final block's feature map (..., T, C_last)."""
        return self.feature_maps(x)[-1]

    def tapped_maps(self, x: torch.Tensor) -> list[torch.Tensor]:
        maps = self.feature_maps(x)
        return [maps[i] for i in self.cfg.feature_taps]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Real-vs-generated probability in (0, 1); shape = leading batch dims."""
        stats = feature_stats(self.extract_features(x))
        pooled = torch.cat([stats.mean, stats.std], dim=-1)
        return torch.sigmoid(self.head(pooled).squeeze(-1))

    def score_series(self, s: TimeSeries) -> float:
        dtype = next(self.parameters()).dtype
        with torch.no_grad():
            return float(self.forward(torch.as_tensor(s.values.copy(), dtype=dtype)))

    def save(self, path) -> None:
        save_checkpoint(path, kind="discriminator", payload={
            "config": asdict(self.cfg),
            "state_dict": self.state_dict(),
        })

    @classmethod
    def load(cls, path) -> "Discriminator":
        data = load_checkpoint(path, expect_kind="discriminator")
        model = cls(DiscriminatorConfig(**data["config"]))
        model.load_state_dict(data["state_dict"])
        return model
