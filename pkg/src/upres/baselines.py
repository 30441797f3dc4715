"""Static upsampling baselines: linear interpolation and GP regression.

The GP route fits a zero-mean squared-exponential process to the mean-centered
anchors and evaluates the posterior mean on the fine grid. Positions past the
last anchor follow the same hold-last-value policy as the linear seed, so both
baselines produce windows of identical shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, KernelNotPositiveDefiniteError
from .series import TimeSeries, linear_init

JITTER_LADDER = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


@dataclass(frozen=True)
class GpConfig:
    length_scale: float | None = None  # seconds; defaults to the input step
    signal_variance: float = 1.0
    noise_variance: float = 1e-6
    optimize: bool = False
    optimize_steps: int = 100
    optimize_lr: float = 0.05

    def __post_init__(self):
        if self.length_scale is not None and not (self.length_scale > 0):
            raise DataError(f"length_scale must be > 0, got {self.length_scale}")
        if not (self.signal_variance > 0 and self.noise_variance > 0):
            raise DataError("variances must be > 0")


def _sqexp(t_a: np.ndarray, t_b: np.ndarray, length_scale: float, signal_variance: float) -> np.ndarray:
    diff = t_a[:, None] - t_b[None, :]
    return signal_variance * np.exp(-0.5 * (diff / length_scale) ** 2)


def _chol_with_jitter(gram: np.ndarray) -> tuple[np.ndarray, float]:
    scale = float(np.mean(np.diag(gram)))
    tried = []
    for jitter in JITTER_LADDER:
        tried.append(jitter)
        try:
            return np.linalg.cholesky(gram + jitter * scale * np.eye(gram.shape[0])), jitter
        except np.linalg.LinAlgError:
            continue
    raise KernelNotPositiveDefiniteError(
        f"kernel matrix not positive-definite after jitter ladder {tried}", jitter_tried=tried
    )


def _log_marginal_likelihood_grad(
    t: np.ndarray, y: np.ndarray, length_scale: float, signal_variance: float, noise_variance: float
) -> tuple[float, float, float]:
    """Log marginal likelihood and its gradient w.r.t. (log length_scale, log signal_variance)."""
    n = t.size
    k = _sqexp(t, t, length_scale, signal_variance) + noise_variance * np.eye(n)
    chol, _ = _chol_with_jitter(k)
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, y))
    k_inv = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(n)))
    lml = -0.5 * float(y @ alpha) - float(np.log(np.diag(chol)).sum()) - 0.5 * n * math.log(2 * math.pi)
    inner = np.outer(alpha, alpha) - k_inv
    sq = (t[:, None] - t[None, :]) ** 2
    k_noise_free = _sqexp(t, t, length_scale, signal_variance)
    dk_dlog_ls = k_noise_free * sq / length_scale**2
    dk_dlog_sv = k_noise_free
    grad_ls = 0.5 * float(np.trace(inner @ dk_dlog_ls))
    grad_sv = 0.5 * float(np.trace(inner @ dk_dlog_sv))
    return lml, grad_ls, grad_sv


def _optimize_hyperparameters(t: np.ndarray, y: np.ndarray, cfg: GpConfig, length_scale: float) -> tuple[float, float]:
    """Gradient ascent on the log marginal likelihood in log-hyperparameter space.

    Steps are clipped and the parameters boxed so a steep likelihood surface
    cannot blow the ascent up.
    """
    log_ls = math.log(length_scale)
    log_sv = math.log(cfg.signal_variance)
    ls_box = (log_ls + math.log(1e-2), log_ls + math.log(1e3))
    sv_box = (log_sv + math.log(1e-4), log_sv + math.log(1e4))
    max_step = 0.2
    for _ in range(cfg.optimize_steps):
        _, g_ls, g_sv = _log_marginal_likelihood_grad(
            t, y, math.exp(log_ls), math.exp(log_sv), cfg.noise_variance
        )
        log_ls = min(max(log_ls + max(-max_step, min(max_step, cfg.optimize_lr * g_ls)), ls_box[0]), ls_box[1])
        log_sv = min(max(log_sv + max(-max_step, min(max_step, cfg.optimize_lr * g_sv)), sv_box[0]), sv_box[1])
    return math.exp(log_ls), math.exp(log_sv)


def upsample_gp(s: TimeSeries, factor: int, cfg: GpConfig | None = None) -> TimeSeries:
    """Posterior-mean upsampling on the fine grid, factor x denser than the input."""
    cfg = cfg or GpConfig()
    factor = int(factor)
    if factor < 2:
        raise DataError(f"factor must be >= 2, got {factor}")
    n = len(s)
    length_scale = cfg.length_scale if cfg.length_scale is not None else s.step

    t_anchor = np.arange(n, dtype=np.float64) * s.step
    y = s.values.astype(np.float64)
    offset = float(y.mean())
    centered = y - offset

    if cfg.optimize:
        length_scale, signal_variance = _optimize_hyperparameters(t_anchor, centered, cfg, length_scale)
        cfg = replace(cfg, signal_variance=signal_variance)

    fine_step = s.step / factor
    t_fine = np.arange(n * factor, dtype=np.float64) * fine_step

    gram = _sqexp(t_anchor, t_anchor, length_scale, cfg.signal_variance) + cfg.noise_variance * np.eye(n)
    chol, _ = _chol_with_jitter(gram)
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, centered))
    cross = _sqexp(t_fine, t_anchor, length_scale, cfg.signal_variance)
    mean = cross @ alpha + offset

    # tail beyond the last anchor follows the linear seed's hold policy
    mean[(n - 1) * factor + 1 :] = y[-1]
    return TimeSeries(values=mean, step=fine_step, start_time=s.start_time, name=s.name)


def upsample_linear(s: TimeSeries, factor: int) -> TimeSeries:
    """Plain linear-interpolation baseline (the generator's seed, as a method)."""
    return linear_init(s, factor)
