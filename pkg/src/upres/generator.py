"""Resolution-agnostic transformer generator for series upsampling.

The coarse input is embedded and encoded twice in parallel: an attention
stack (whose blocks follow the configured attention mode) and a learnable
frequency-domain filter. Both feature maps are fused and handed to a decoder
that queries them from the fine-grid interpolation seed, so the output length
always follows the seed, whatever the upsampling factor. The output head is a
residual correction on top of the seed: a freshly initialized generator
reproduces plain linear interpolation exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn as nn

from .attention import ATTENTION_MODES, AttentionConfig, MultiHeadAttention
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DataError
from .fusion import FusionConfig, MultiScaleAttentionFusion
from .series import ResamplingTask, TimeSeries, linear_init


@dataclass(frozen=True)
class GeneratorConfig:
    d_model: int = 64
    n_heads: int = 4
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    attention_mode: str = "S_C"
    feedforward_dim: int | None = None
    conv_kernel: int = 3
    fft_bins: int = 65
    msaa_per_layer: bool = True
    fusion_reduced_channels: int | None = None
    fusion_kernel_sizes: tuple[int, ...] = (3, 5, 7)
    dropout: float = 0.0

    def __post_init__(self):
        if self.attention_mode not in ATTENTION_MODES:
            raise ValueError(f"attention_mode must be one of {ATTENTION_MODES}")
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.fft_bins < 2:
            raise ValueError(f"fft_bins must be >= 2, got {self.fft_bins}")
        object.__setattr__(self, "fusion_kernel_sizes", tuple(self.fusion_kernel_sizes))

    @property
    def ff_dim(self) -> int:
        return self.feedforward_dim if self.feedforward_dim is not None else 4 * self.d_model

    def attention(self, mode: str) -> AttentionConfig:
        return AttentionConfig(
            d_model=self.d_model,
            n_heads=self.n_heads,
            conv_kernel=self.conv_kernel,
            mode=mode,
            dropout=self.dropout,
        )

    def fusion(self, n_inputs: int = 2) -> FusionConfig:
        return FusionConfig(
            in_channels=self.d_model,
            n_inputs=n_inputs,
            reduced_channels=self.fusion_reduced_channels,
            out_channels=self.d_model,
            kernel_sizes=self.fusion_kernel_sizes,
        )


def sinusoidal_positions(t: int, d_model: int, device=None, dtype=None) -> torch.Tensor:
    """Fixed sin/cos positional table of shape (t, d_model)."""
    dtype = dtype or torch.get_default_dtype()
    pos = torch.arange(t, device=device, dtype=dtype).unsqueeze(1)
    idx = torch.arange(0, d_model, 2, device=device, dtype=dtype)
    angle = pos / torch.pow(torch.tensor(10000.0, device=device, dtype=dtype), idx / d_model)
    table = torch.zeros(t, d_model, device=device, dtype=dtype)
    table[:, 0::2] = torch.sin(angle)
    table[:, 1::2] = torch.cos(angle[:, : d_model // 2])
    return table


class SeriesEmbedding(nn.Module):
    """Per-sample value projection plus sinusoidal positions."""

    def __init__(self, d_model: int):
        super().__init__()
        self.value_proj = nn.Linear(1, d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.value_proj(x.unsqueeze(-1))
        pe = sinusoidal_positions(x.shape[-1], h.shape[-1], device=x.device, dtype=h.dtype)
        return h + pe


class FrequencyFilter(nn.Module):
    """Learnable complex filter applied in the Fourier domain along time.

    The filter lives on a fixed grid of normalized-frequency bins and is
    linearly interpolated onto however many bins the current length needs,
    so one parameter block serves every resolution. At the all-ones identity
    initialization the layer is an exact (round-trip) no-op.
    """

    def __init__(self, channels: int, bins: int = 65):
        super().__init__()
        self.bins = bins
        self.filter_real = nn.Parameter(torch.ones(bins, channels))
        self.filter_imag = nn.Parameter(torch.zeros(bins, channels))

    def _sample(self, table: torch.Tensor, n: int) -> torch.Tensor:
        if n == self.bins:
            return table
        pos = torch.linspace(0.0, 1.0, n, device=table.device, dtype=table.dtype) * (self.bins - 1)
        lo = pos.floor().long().clamp(max=self.bins - 2)
        frac = (pos - lo.to(table.dtype)).unsqueeze(-1)
        return table[lo] * (1 - frac) + table[lo + 1] * frac

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        t = x.shape[-2]
        spectrum = torch.fft.rfft(x, dim=-2)
        n_bins = spectrum.shape[-2]
        filt = torch.complex(self._sample(self.filter_real, n_bins), self._sample(self.filter_imag, n_bins))
        return torch.fft.irfft(spectrum * filt, n=t, dim=-2)


class FeedForward(nn.Module):
    def __init__(self, d_model: int, hidden: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(d_model, hidden), nn.GELU(), nn.Linear(hidden, d_model))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class EncoderLayer(nn.Module):
    """Pre-norm encoder block wired according to the attention mode.

    S+C chains a self-attention sublayer and a convolutional-attention
    sublayer; S_C runs them in parallel on the same normed input and fuses
    the two outputs (multi-scale fusion, or their mean when per-layer fusion
    is disabled).
    """

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.mode = cfg.attention_mode
        d = cfg.d_model
        self.norm_attn = nn.LayerNorm(d)
        self.norm_ff = nn.LayerNorm(d)
        self.ff = FeedForward(d, cfg.ff_dim)
        if self.mode == "SELF":
            self.attn = MultiHeadAttention(cfg.attention("SELF"))
        elif self.mode == "CONV":
            self.attn = MultiHeadAttention(cfg.attention("CONV"))
        elif self.mode == "S+C":
            self.attn = MultiHeadAttention(cfg.attention("SELF"))
            self.norm_attn2 = nn.LayerNorm(d)
            self.attn2 = MultiHeadAttention(cfg.attention("CONV"))
        else:  # S_C
            self.attn_self = MultiHeadAttention(cfg.attention("SELF"))
            self.attn_conv = MultiHeadAttention(cfg.attention("CONV"))
            self.pair_fusion = MultiScaleAttentionFusion(cfg.fusion(2)) if cfg.msaa_per_layer else None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.mode in ("SELF", "CONV"):
            h = self.norm_attn(x)
            x = x + self.attn(h, h)
        elif self.mode == "S+C":
            h = self.norm_attn(x)
            x = x + self.attn(h, h)
            h = self.norm_attn2(x)
            x = x + self.attn2(h, h)
        else:
            h = self.norm_attn(x)
            a = self.attn_self(h, h)
            b = self.attn_conv(h, h)
            x = x + (self.pair_fusion([a, b]) if self.pair_fusion is not None else 0.5 * (a + b))
        return x + self.ff(self.norm_ff(x))


class DecoderLayer(nn.Module):
    """Pre-norm decoder block: unmasked self-attention, then cross-attention."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        d = cfg.d_model
        self.norm_self = nn.LayerNorm(d)
        self.self_attn = MultiHeadAttention(cfg.attention("SELF"))
        self.norm_cross = nn.LayerNorm(d)
        self.cross_attn = MultiHeadAttention(cfg.attention("SELF"))
        self.norm_ff = nn.LayerNorm(d)
        self.ff = FeedForward(d, cfg.ff_dim)

    def forward(self, x: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        h = self.norm_self(x)
        x = x + self.self_attn(h, h)
        x = x + self.cross_attn(self.norm_cross(x), memory)
        return x + self.ff(self.norm_ff(x))


class Generator(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        self.input_embed = SeriesEmbedding(cfg.d_model)
        self.encoder_layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.n_encoder_layers))
        self.freq_branch = FrequencyFilter(cfg.d_model, cfg.fft_bins)
        self.encoder_fusion = MultiScaleAttentionFusion(cfg.fusion(2))
        self.encoder_norm = nn.LayerNorm(cfg.d_model)
        self.output_embed = SeriesEmbedding(cfg.d_model)
        self.decoder_layers = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.n_decoder_layers))
        self.decoder_norm = nn.LayerNorm(cfg.d_model)
        self.head = nn.Linear(cfg.d_model, 1)
        # start exactly at the interpolation seed: the untrained generator is
        # the linear baseline, and data-consistency losses start at zero
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        """(..., T) values -> (..., T, d_model) fused encoder features."""
        embedded = self.input_embed(x)
        h = embedded
        for layer in self.encoder_layers:
            h = layer(h)
        spectral = self.freq_branch(embedded)
        return self.encoder_norm(self.encoder_fusion([h, spectral]))

    def decode(self, memory: torch.Tensor, x_init: torch.Tensor) -> torch.Tensor:
        """Fine-grid seed (..., T_out) + encoder memory -> (..., T_out) output values."""
        if memory.shape[-1] != self.cfg.d_model:
            raise DataError(f"memory has {memory.shape[-1]} channels, expected {self.cfg.d_model}")
        h = self.output_embed(x_init)
        for layer in self.decoder_layers:
            h = layer(h, memory)
        correction = self.head(self.decoder_norm(h)).squeeze(-1)
        return x_init + correction

    def forward(self, x: torch.Tensor, x_init: torch.Tensor) -> torch.Tensor:
        return self.decode(self.encode(x), x_init)

    def generate(self, s: TimeSeries, task: ResamplingTask) -> TimeSeries:
        """Upsample one window; output step is the input step over the factor."""
        if len(s) != task.window_samples:
            raise DataError(f"window of {len(s)} samples, task expects {task.window_samples}")
        return self.upsample_series(s, task.factor)

    def upsample_series(self, s: TimeSeries, factor: int) -> TimeSeries:
        seed = linear_init(s, factor)
        dtype = next(self.parameters()).dtype
        x = torch.as_tensor(s.values.copy(), dtype=dtype)
        x_init = torch.as_tensor(seed.values.copy(), dtype=dtype)
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                y = self.forward(x, x_init)
        finally:
            self.train(was_training)
        return TimeSeries(
            values=y.numpy().astype(np.float64),
            step=s.step / factor,
            start_time=s.start_time,
            name=s.name,
        )

    def save(self, path) -> None:
        save_checkpoint(path, kind="generator", payload={
            "config": asdict(self.cfg),
            "state_dict": self.state_dict(),
        })

    @classmethod
    def load(cls, path) -> "Generator":
        data = load_checkpoint(path, expect_kind="generator")
        cfg = GeneratorConfig(**data["config"])
        model = cls(cfg)
        model.load_state_dict(data["state_dict"])
        return model
