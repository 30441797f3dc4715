"""Uniform time-series data model, resolution transforms, datasets, waveforms.

Everything downstream (models, losses, baselines) consumes the types defined
here. A :class:`TimeSeries` is an immutable, uniformly sampled scalar series;
datasets are built from non-overlapping windows of one series. Held-out
reference windows are reachable only through an audited accessor so that no
loss computation can silently read them.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal, Optional

import numpy as np
import pandas as pd

from .errors import DataError, ReferenceAuditError

WindowMode = Literal["mean", "point"]

_WAVEFORM_KINDS = ("line", "square", "sine", "triangle")


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar series; sample k lives at start_time + k*step."""

    values: np.ndarray
    step: float
    start_time: float = 0.0
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).copy()
        if v.ndim != 1:
            raise DataError(f"values must be 1-D, got shape {v.shape}")
        if v.size < 2:
            raise DataError(f"series needs at least 2 samples, got {v.size}")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise DataError(f"non-finite value at index {bad}")
        if not (float(self.step) > 0.0):
            raise DataError(f"step must be > 0, got {self.step}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "start_time", float(self.start_time))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) * self.step

    def with_values(self, values, step: float | None = None, name: str | None = None) -> "TimeSeries":
        return TimeSeries(
            values=values,
            step=self.step if step is None else step,
            start_time=self.start_time,
            name=self.name if name is None else name,
        )


@dataclass(frozen=True)
class ResamplingTask:
    """Integer upsampling factor plus the coarse window length of one example."""

    factor: int
    window_samples: int = 96

    def __post_init__(self):
        if int(self.factor) < 2:
            raise DataError(f"factor must be >= 2, got {self.factor}")
        if int(self.window_samples) < 2:
            raise DataError(f"window_samples must be >= 2, got {self.window_samples}")
        object.__setattr__(self, "factor", int(self.factor))
        object.__setattr__(self, "window_samples", int(self.window_samples))

    @property
    def output_samples(self) -> int:
        return self.window_samples * self.factor


def load_csv(path, column: str, step_hint: float | None = None) -> TimeSeries:
    """Read one value column of a timestamped CSV into a TimeSeries.

    The first column is the timestamp (ISO-8601 text or numeric epoch
    seconds). Rows are sorted by time; spacing must be uniform within
    1e-6 of the inferred step, which must agree with ``step_hint`` when given.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    frame = pd.read_csv(path, sep=",", decimal=".")
    if frame.shape[1] < 2:
        raise DataError(f"{path}: expected a timestamp column plus value columns")
    if column not in frame.columns:
        raise DataError(f"{path}: missing column {column!r} (have {list(frame.columns)})")

    ts_col = frame.columns[0]
    raw_ts = frame[ts_col]
    if pd.api.types.is_numeric_dtype(raw_ts):
        t = raw_ts.to_numpy(dtype=np.float64)
    else:
        parsed = pd.to_datetime(raw_ts, utc=True, format="ISO8601")
        t = parsed.astype("int64").to_numpy() / 1e9
    if not np.all(np.isfinite(t)):
        bad = int(np.flatnonzero(~np.isfinite(t))[0])
        raise DataError(f"{path}: unparseable timestamp at row {bad}")

    order = np.argsort(t, kind="stable")
    t = t[order]
    values = frame[column].to_numpy(dtype=np.float64)[order]

    if values.size < 2:
        raise DataError(f"{path}: need at least 2 rows, got {values.size}")
    non_finite = np.flatnonzero(~np.isfinite(values))
    if non_finite.size:
        raise DataError(f"{path}: non-finite value in column {column!r} at row {int(non_finite[0])}")

    diffs = np.diff(t)
    step = float(np.median(diffs))
    if step <= 0:
        raise DataError(f"{path}: timestamps are not strictly increasing")
    tol = 1e-6 * step
    off = np.flatnonzero(np.abs(diffs - step) > tol)
    if off.size:
        i = int(off[0])
        raise DataError(
            f"{path}: non-uniform spacing at row {i + 1}: gap {diffs[i]:g} s vs step {step:g} s"
        )
    if step_hint is not None and abs(step - float(step_hint)) > 1e-6 * float(step_hint):
        raise DataError(f"{path}: inferred step {step:g} s does not match step_hint {step_hint:g} s")

    return TimeSeries(values=values, step=step, start_time=float(t[0]), name=column)


def downsample(s: TimeSeries, factor: int, mode: WindowMode = "mean") -> TimeSeries:
    """Collapse each block of ``factor`` samples to one (block mean or first sample)."""
    factor = int(factor)
    if factor < 1:
        raise DataError(f"factor must be >= 1, got {factor}")
    if len(s) % factor != 0:
        raise DataError(f"length {len(s)} not divisible by factor {factor}")
    blocks = s.values.reshape(-1, factor)
    if mode == "mean":
        out = blocks.mean(axis=1)
    elif mode == "point":
        out = blocks[:, 0].copy()
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return TimeSeries(values=out, step=s.step * factor, start_time=s.start_time, name=s.name)


def linear_init(s: TimeSeries, factor: int) -> TimeSeries:
    """Linear-interpolation seed on the fine grid.

    Output has length len(s)*factor so window counts multiply exactly;
    anchors are reproduced at indices k*factor and the final partial segment
    holds the last anchor value.
    """
    factor = int(factor)
    if factor < 2:
        raise DataError(f"factor must be >= 2, got {factor}")
    n = len(s)
    fine_pos = np.arange(n * factor, dtype=np.float64) / factor
    out = np.interp(fine_pos, np.arange(n, dtype=np.float64), s.values)
    return TimeSeries(values=out, step=s.step / factor, start_time=s.start_time, name=s.name)


def window_align(x_out: TimeSeries, factor: int, mode: WindowMode = "point") -> TimeSeries:
    """Map a fine-grid series back onto the coarse grid.

    point mode samples at indices k*factor (the anchors); mean mode takes each
    non-overlapping block average of width ``factor``.
    """
    factor = int(factor)
    if factor < 1:
        raise DataError(f"factor must be >= 1, got {factor}")
    if len(x_out) % factor != 0:
        raise DataError(f"length {len(x_out)} not divisible by factor {factor}")
    if mode == "point":
        out = x_out.values[::factor].copy()
    elif mode == "mean":
        out = x_out.values.reshape(-1, factor).mean(axis=1)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return TimeSeries(values=out, step=x_out.step * factor, start_time=x_out.start_time, name=x_out.name)


def synth_waveform(
    kind: str,
    n: int,
    period: int | None = None,
    amplitude: float = 1.0,
    noise_std: float = 0.0,
    seed: int = 0,
    step: float = 1.0,
    start_time: float = 0.0,
) -> TimeSeries:
    """Deterministic test waveforms: ramp, square, sine, or triangle.

    With noise_std=0 the output is seed-independent. Periodic kinds need
    period >= 2 samples.
    """
    if kind not in _WAVEFORM_KINDS:
        raise ValueError(f"unknown waveform kind {kind!r}, expected one of {_WAVEFORM_KINDS}")
    n = int(n)
    if n < 2:
        raise DataError(f"need n >= 2, got {n}")
    k = np.arange(n, dtype=np.float64)

    if kind == "line":
        values = amplitude * k / (n - 1)
    else:
        if period is None or int(period) < 2:
            raise DataError(f"periodic kind {kind!r} needs period >= 2, got {period}")
        period = int(period)
        if kind == "sine":
            values = amplitude * np.sin(2.0 * np.pi * k / period)
        elif kind == "square":
            values = np.where((k % period) < period / 2.0, amplitude, -amplitude)
        else:  # triangle: linear rise to +amplitude, fall through -amplitude, back to 0
            phase = (k % period) / period
            values = np.where(
                phase < 0.25,
                4.0 * phase,
                np.where(phase < 0.75, 2.0 - 4.0 * phase, 4.0 * phase - 4.0),
            ) * amplitude

    if noise_std > 0.0:
        rng = np.random.default_rng(seed)
        values = values + rng.normal(0.0, noise_std, size=n)
    return TimeSeries(values=values, step=step, start_time=start_time, name=kind)


@dataclass(frozen=True)
class Normalization:
    """Per-dataset z-score transform fitted on the train split."""

    mean: float
    std: float

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.std + self.mean


@dataclass(frozen=True)
class WindowExample:
    """One training example: coarse input window plus its interpolation seed.

    The matching high-resolution reference window (when the dataset has one)
    is only reachable through :attr:`reference`, which is audited by the
    owning dataset.
    """

    x_in: np.ndarray
    x_init: np.ndarray
    _dataset: "SeriesDataset" = field(repr=False, compare=False)
    _split: str = field(repr=False, compare=False)
    _index: int = field(repr=False, compare=False)

    @property
    def reference(self) -> Optional[np.ndarray]:
        return self._dataset.reference_window(self._split, self._index)


class SeriesDataset:
    """Windowed train/test examples with shared normalization and a reference audit.

    Reference windows never participate in training: while
    :meth:`guard_references` is active every access raises
    :class:`ReferenceAuditError`, and all accesses are counted either way.
    """

    def __init__(
        self,
        task: ResamplingTask,
        train_inputs: np.ndarray,
        train_inits: np.ndarray,
        test_inputs: np.ndarray,
        test_inits: np.ndarray,
        norm: Normalization,
        train_refs: np.ndarray | None = None,
        test_refs: np.ndarray | None = None,
        input_step: float = 1.0,
    ):
        self.task = task
        self.norm = norm
        self.input_step = float(input_step)
        self._arrays = {
            "train": (np.asarray(train_inputs), np.asarray(train_inits)),
            "test": (np.asarray(test_inputs), np.asarray(test_inits)),
        }
        self._refs = {
            "train": None if train_refs is None else np.asarray(train_refs),
            "test": None if test_refs is None else np.asarray(test_refs),
        }
        self._guard_depth = 0
        self.reference_reads = 0
        self.guarded_access_attempts = 0
        self.train = self._wrap("train")
        self.test = self._wrap("test")

    def _wrap(self, split: str) -> list[WindowExample]:
        inputs, inits = self._arrays[split]
        return [
            WindowExample(x_in=inputs[i], x_init=inits[i], _dataset=self, _split=split, _index=i)
            for i in range(inputs.shape[0])
        ]

    @property
    def has_reference(self) -> bool:
        return self._refs["train"] is not None

    def split_arrays(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        """(inputs, inits) matrices for one split, shapes (n, W) and (n, W*factor)."""
        return self._arrays[split]

    def reference_window(self, split: str, index: int) -> Optional[np.ndarray]:
        if self._guard_depth > 0:
            self.guarded_access_attempts += 1
            raise ReferenceAuditError(
                f"reference window {split}[{index}] accessed inside a guarded loss path"
            )
        refs = self._refs[split]
        if refs is None:
            return None
        self.reference_reads += 1
        return refs[index]

    @contextmanager
    def guard_references(self) -> Iterator[None]:
        """Forbid reference access for the duration (training loss paths)."""
        self._guard_depth += 1
        try:
            yield
        finally:
            self._guard_depth -= 1

    def audit_report(self) -> dict:
        return {
            "guarded_access_attempts": int(self.guarded_access_attempts),
            "reference_reads_outside_guard": int(self.reference_reads),
        }


def make_dataset(
    s: TimeSeries,
    task: ResamplingTask,
    split_fraction: float = 0.8,
    reference: TimeSeries | None = None,
) -> SeriesDataset:
    """Tile a series into non-overlapping windows and split chronologically.

    The z-score normalization is fitted on train-split inputs only and applied
    to every window, reference windows included. Each example carries the
    per-window linear-interpolation seed at the fine step.
    """
    if not (0.0 < split_fraction < 1.0):
        raise DataError(f"split_fraction must be in (0, 1), got {split_fraction}")
    w = task.window_samples
    if len(s) < 2 * w:
        raise DataError(f"series of {len(s)} samples too short for two windows of {w}")
    n_windows = len(s) // w
    n_train = min(max(int(n_windows * split_fraction), 1), n_windows - 1)

    if reference is not None:
        if len(reference) != len(s) * task.factor:
            raise DataError(
                f"reference length {len(reference)} != input length {len(s)} x factor {task.factor}"
            )
        fine_step = s.step / task.factor
        if abs(reference.step - fine_step) > 1e-9 * fine_step:
            raise DataError(f"reference step {reference.step} != input step / factor {fine_step}")
        if abs(reference.start_time - s.start_time) > 1e-6 * s.step:
            raise DataError("reference is not aligned with the input series")

    train_values = s.values[: n_train * w]
    mean = float(train_values.mean())
    std = float(train_values.std())
    if std < 1e-12:
        std = 1.0
    norm = Normalization(mean=mean, std=std)

    def build(lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        inputs, inits = [], []
        for i in range(lo, hi):
            window = norm.normalize(s.values[i * w : (i + 1) * w])
            seed = linear_init(TimeSeries(window, step=s.step), task.factor)
            inputs.append(window)
            inits.append(seed.values)
        return np.stack(inputs), np.stack(inits)

    train_inputs, train_inits = build(0, n_train)
    test_inputs, test_inits = build(n_train, n_windows)

    train_refs = test_refs = None
    if reference is not None:
        wf = w * task.factor
        ref_windows = np.stack(
            [norm.normalize(reference.values[i * wf : (i + 1) * wf]) for i in range(n_windows)]
        )
        train_refs = ref_windows[:n_train]
        test_refs = ref_windows[n_train:]

    return SeriesDataset(
        task=task,
        train_inputs=train_inputs,
        train_inits=train_inits,
        test_inputs=test_inputs,
        test_inits=test_inits,
        norm=norm,
        train_refs=train_refs,
        test_refs=test_refs,
        input_step=s.step,
    )
