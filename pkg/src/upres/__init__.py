"""Self-supervised time-series upsampling toolkit."""

from .series import ResamplingTask, SeriesDataset, TimeSeries, downsample, linear_init, load_csv, make_dataset, synth_waveform, window_align
from .metrics import MetricReport, SignificanceResult, mae, metric_report, paired_significance, pcc, rmse
from .generator import Generator, GeneratorConfig
from .discriminator import Discriminator, DiscriminatorConfig
from .losses import LossWeights, combine_total
from .training import PhasePlan, RunHistory, run_phase, select_best, should_early_stop, train_phases
from .baselines import GpConfig, upsample_gp, upsample_linear

__version__ = "0.1.0"

__all__ = [
    "Discriminator",
    "DiscriminatorConfig",
    "Generator",
    "GeneratorConfig",
    "GpConfig",
    "LossWeights",
    "MetricReport",
    "PhasePlan",
    "ResamplingTask",
    "RunHistory",
    "SeriesDataset",
    "SignificanceResult",
    "TimeSeries",
    "combine_total",
    "downsample",
    "linear_init",
    "load_csv",
    "mae",
    "make_dataset",
    "metric_report",
    "paired_significance",
    "pcc",
    "rmse",
    "run_phase",
    "select_best",
    "should_early_stop",
    "synth_waveform",
    "train_phases",
    "upsample_gp",
    "upsample_linear",
    "window_align",
]
