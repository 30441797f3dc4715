"""Training objectives for the upsampling generator and its discriminator.

All functions take torch tensors (trailing time axis) so gradients flow to
whatever produced them; TimeSeries values pass through torch.as_tensor
unchanged. Data-consistency terms compare the generated fine series against
the coarse input through the window-alignment operator, so the true fine
series never appears in any of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .discriminator import feature_stats
from .errors import DataError

# softplus(ALPHA_FOR_UNIT_WEIGHT) == 1, the documented starting weight
ALPHA_FOR_UNIT_WEIGHT = math.log(math.e - 1.0)


def _as_time_tensor(x) -> torch.Tensor:
    if hasattr(x, "values") and not torch.is_tensor(x):
        x = x.values
    if isinstance(x, np.ndarray) and not x.flags.writeable:
        x = x.copy()
    t = torch.as_tensor(x)
    return t.to(torch.get_default_dtype()) if not t.dtype.is_floating_point else t


def window_reduce(x_out: torch.Tensor, factor: int, mode: str = "point") -> torch.Tensor:
    """Collapse a fine (..., T*factor) tensor back onto the coarse grid."""
    factor = int(factor)
    if x_out.shape[-1] % factor != 0:
        raise DataError(f"length {x_out.shape[-1]} not divisible by factor {factor}")
    if mode == "point":
        return x_out[..., ::factor]
    if mode == "mean":
        return x_out.reshape(*x_out.shape[:-1], x_out.shape[-1] // factor, factor).mean(dim=-1)
    raise ValueError(f"unknown window mode {mode!r}")


def loss_mse(x_out, x_in, factor: int, mode: str = "point") -> torch.Tensor:
    """Anchor consistency: MSE between the aligned output and the input."""
    x_out, x_in = _as_time_tensor(x_out), _as_time_tensor(x_in)
    if x_out.shape[-1] != x_in.shape[-1] * factor:
        raise DataError(
            f"output length {x_out.shape[-1]} != input length {x_in.shape[-1]} x factor {factor}"
        )
    return F.mse_loss(window_reduce(x_out, factor, mode), x_in)


def loss_smoothness(x_out) -> torch.Tensor:
    """Mean squared second difference of the generated series."""
    x = _as_time_tensor(x_out)
    if x.shape[-1] < 3:
        raise DataError(f"need at least 3 samples, got {x.shape[-1]}")
    second = x[..., 2:] - 2.0 * x[..., 1:-1] + x[..., :-2]
    return (second**2).mean()


def loss_gradient(x_out, x_in, factor: int, mode: str = "point") -> torch.Tensor:
    """First-difference consistency between aligned output and input."""
    x_out, x_in = _as_time_tensor(x_out), _as_time_tensor(x_in)
    if x_in.shape[-1] < 2:
        raise DataError("input needs at least 2 samples")
    if x_out.shape[-1] != x_in.shape[-1] * factor:
        raise DataError(
            f"output length {x_out.shape[-1]} != input length {x_in.shape[-1]} x factor {factor}"
        )
    reduced = window_reduce(x_out, factor, mode)
    return F.mse_loss(reduced[..., 1:] - reduced[..., :-1], x_in[..., 1:] - x_in[..., :-1])


def loss_feature_matching(f_in: torch.Tensor, f_out: torch.Tensor) -> torch.Tensor:
    """Squared distance between temporal feature statistics of two maps.

    The maps may have different lengths; only their per-channel mean and
    standard deviation are compared.
    """
    if f_in.shape[-1] != f_out.shape[-1]:
        raise DataError(f"channel mismatch: {f_in.shape[-1]} vs {f_out.shape[-1]}")
    s_in = feature_stats(f_in)
    s_out = feature_stats(f_out)
    return ((s_in.mean - s_out.mean) ** 2).sum(dim=-1).mean() + (
        (s_in.std - s_out.std) ** 2
    ).sum(dim=-1).mean()


def loss_discriminator(p_real: torch.Tensor, p_fake: torch.Tensor, eps: float = 1e-7) -> torch.Tensor:
    """Binary cross-entropy on real/fake probabilities, clamped away from {0, 1}."""
    p_real = _as_time_tensor(p_real).clamp(eps, 1.0 - eps)
    p_fake = _as_time_tensor(p_fake).clamp(eps, 1.0 - eps)
    return -(torch.log(p_real).mean() + torch.log(1.0 - p_fake).mean())


class LossWeights(nn.Module):
    """One learnable raw parameter per loss component; softplus keeps each
    effective weight positive. Raw values start at softplus^-1(1) so every
    component begins with unit weight."""

    def __init__(self, names: Sequence[str]):
        super().__init__()
        self.names = tuple(names)
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate component name in {self.names}")
        self.raw = nn.Parameter(torch.full((len(self.names),), ALPHA_FOR_UNIT_WEIGHT))

    def weight_tensors(self) -> dict[str, torch.Tensor]:
        w = F.softplus(self.raw)
        return {name: w[i] for i, name in enumerate(self.names)}

    def weights(self) -> dict[str, float]:
        return {name: float(t.detach()) for name, t in self.weight_tensors().items()}


@dataclass(frozen=True)
class LossBreakdown:
    names: tuple[str, ...]
    values: tuple[float, ...]
    weights: tuple[float, ...]
    total: torch.Tensor

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))

    @property
    def total_value(self) -> float:
        return float(self.total.detach())


def combine_total(components, weights: LossWeights) -> LossBreakdown:
    """Weighted sum of named loss terms with learnable softplus weights.

    The raw parameters stay in the graph, so they are trained together with
    whatever produced the component losses.
    """
    if isinstance(components, Mapping):
        items = list(components.items())
    else:
        items = list(components)
    if not items:
        raise DataError("no loss components")
    tensors = weights.weight_tensors()
    missing = [name for name, _ in items if name not in tensors]
    if missing:
        raise DataError(f"no learnable weight for components {missing} (have {list(weights.names)})")
    total = None
    values, lambdas = [], []
    for name, value in items:
        value = value if torch.is_tensor(value) else torch.as_tensor(float(value))
        term = tensors[name] * value
        total = term if total is None else total + term
        values.append(float(value.detach()))
        lambdas.append(float(tensors[name].detach()))
    return LossBreakdown(
        names=tuple(name for name, _ in items),
        values=tuple(values),
        weights=tuple(lambdas),
        total=total,
    )
