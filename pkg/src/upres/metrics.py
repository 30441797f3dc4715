"""Evaluation metrics (RMSE, MAE, PCC) and the paired run-significance test."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .errors import DataError, DegenerateInputError


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise DataError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise DataError("empty vectors")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DataError("non-finite entries")
    return a, b


def rmse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def pcc(a, b) -> float:
    """Pearson correlation. Zero-variance input is rejected rather than NaN."""
    a, b = _pair(a, b)
    if a.size < 2:
        raise DataError("pcc needs at least 2 samples")
    da = a - a.mean()
    db = b - b.mean()
    sa = float(np.sqrt(np.mean(da**2)))
    sb = float(np.sqrt(np.mean(db**2)))
    if sa == 0.0 or sb == 0.0:
        raise DegenerateInputError("pcc undefined for a zero-variance input")
    r = float(np.mean(da * db) / (sa * sb))
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mae: float
    pcc: float
    n: int

    def __post_init__(self):
        if not (self.rmse + 1e-12 >= self.mae >= 0.0):
            raise DataError(f"invalid report: rmse={self.rmse} mae={self.mae}")
        if not (-1.0 - 1e-12 <= self.pcc <= 1.0 + 1e-12):
            raise DataError(f"pcc out of range: {self.pcc}")


def metric_report(prediction, reference) -> MetricReport:
    a, b = _pair(prediction, reference)
    return MetricReport(rmse=rmse(a, b), mae=mae(a, b), pcc=pcc(a, b), n=int(a.size))


@dataclass(frozen=True)
class SignificanceResult:
    p_value: float
    mean_diff: float
    n_runs: int

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise DataError(f"p_value out of range: {self.p_value}")


def paired_significance(runs_a, runs_b) -> SignificanceResult:
    """Two-sided paired Student t-test over per-run metric differences.

    Degenerate cases are pinned: identical runs give p=1, a constant nonzero
    difference gives p=0. The t CDF is evaluated through the regularized
    incomplete beta function.
    """
    a, b = _pair(runs_a, runs_b)
    n = a.size
    if n < 2:
        raise DataError(f"need at least 2 paired runs, got {n}")
    d = a - b
    mean_diff = float(d.mean())
    sd = float(d.std(ddof=1))
    if np.all(d == d[0]) or sd == 0.0:
        # constant differences, including variances that underflow to zero
        p = 1.0 if mean_diff == 0.0 else 0.0
        return SignificanceResult(p_value=p, mean_diff=mean_diff, n_runs=n)
    t = mean_diff / (sd / math.sqrt(n))
    df = n - 1
    # two-sided p: P(|T_df| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    p = min(1.0, max(0.0, p))
    return SignificanceResult(p_value=p, mean_diff=mean_diff, n_runs=n)
