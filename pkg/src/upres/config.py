"""Run configuration: strict JSON schema, env overrides, dataset assembly.

A config file is plain JSON mirroring the dataclasses below. Unknown keys are
rejected outright. Any leaf can be overridden from the environment with
UPRES_<SECTION>__<KEY>=<json-or-string>, e.g. UPRES_TASK__FACTOR=4.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .discriminator import DiscriminatorConfig
from .errors import ConfigError
from .generator import GeneratorConfig
from .series import ResamplingTask, SeriesDataset, TimeSeries, downsample, load_csv, make_dataset, synth_waveform
from .training import PhasePlan

ENV_PREFIX = "UPRES_"


@dataclass(frozen=True)
class WaveComponent:
    kind: str
    period: int | None = None
    amplitude: float = 1.0


@dataclass(frozen=True)
class SyntheticSpec:
    """Synthetic fine-resolution truth: a sum of waveforms plus optional noise.

    The coarse input is produced by downsampling the fine series, which then
    doubles as the held-out reference.
    """

    components: tuple[WaveComponent, ...]
    n_windows: int = 60
    input_step: float = 900.0
    noise_std: float = 0.0
    seed: int = 0
    downsample_mode: str = "point"


@dataclass(frozen=True)
class DataConfig:
    csv: str | None = None
    column: str | None = None
    step_hint: float | None = None
    reference_csv: str | None = None
    reference_column: str | None = None
    synthetic: SyntheticSpec | None = None

    def __post_init__(self):
        if (self.csv is None) == (self.synthetic is None):
            raise ConfigError("data needs exactly one of 'csv' or 'synthetic'")
        if self.csv is not None and self.column is None:
            raise ConfigError("data.csv needs data.column")


@dataclass(frozen=True)
class TaskConfig:
    factor: int = 3
    window_samples: int = 96


@dataclass(frozen=True)
class PhaseSection:
    epochs: int = 30
    batch_size: int = 8
    lr_generator: float = 1e-3
    lr_discriminator: float = 1e-4
    weight_decay: float = 1e-4
    patience: int = 5


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    seed: int = 0
    out_dir: str = "runs"
    data: DataConfig = field(default_factory=lambda: DataConfig(synthetic=_default_synthetic()))
    task: TaskConfig = field(default_factory=TaskConfig)
    split_fraction: float = 0.8
    window_mode: str = "point"
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    phase1: PhaseSection = field(default_factory=PhaseSection)
    phase2: PhaseSection = field(default_factory=PhaseSection)
    phase3: PhaseSection = field(default_factory=PhaseSection)
    phase3_keep_core: bool = True

    @property
    def run_dir(self) -> Path:
        return Path(self.out_dir) / self.name


def _default_synthetic() -> SyntheticSpec:
    return SyntheticSpec(
        components=(
            WaveComponent(kind="sine", period=288, amplitude=1.0),
            WaveComponent(kind="square", period=160, amplitude=0.5),
        )
    )


def _from_dict(cls, value: Any, path: str):
    """Build a (possibly nested) dataclass from plain JSON data, strictly."""
    if value is None or not is_dataclass(cls):
        return value
    if not isinstance(value, Mapping):
        raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(value) - set(known))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown} (known: {sorted(known)})")
    kwargs = {}
    for key, raw in value.items():
        f = known[key]
        sub = _nested_dataclass(f)
        if sub is not None and raw is not None:
            if key == "components":
                kwargs[key] = tuple(_from_dict(WaveComponent, item, f"{path}.{key}[{i}]") for i, item in enumerate(raw))
            else:
                kwargs[key] = _from_dict(sub, raw, f"{path}.{key}")
        else:
            kwargs[key] = tuple(raw) if isinstance(raw, list) else raw
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_NESTED = {
    "data": DataConfig,
    "synthetic": SyntheticSpec,
    "task": TaskConfig,
    "generator": GeneratorConfig,
    "discriminator": DiscriminatorConfig,
    "phase1": PhaseSection,
    "phase2": PhaseSection,
    "phase3": PhaseSection,
    "components": WaveComponent,
}


def _nested_dataclass(f) -> type | None:
    return _NESTED.get(f.name)


def config_from_dict(data: Mapping) -> RunConfig:
    return _from_dict(RunConfig, data, "config")


def config_to_dict(cfg: RunConfig) -> dict:
    return json.loads(json.dumps(dataclasses.asdict(cfg)))


def apply_env_overrides(data: dict, env: Mapping[str, str] | None = None) -> dict:
    """UPRES_A__B=value sets data['a']['b']; values parse as JSON when possible."""
    env = os.environ if env is None else env
    out = json.loads(json.dumps(data))
    for key, raw in sorted(env.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        parts = [p.lower() for p in key[len(ENV_PREFIX):].split("__") if p]
        if not parts:
            continue
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return out


def load_config(path, env: Mapping[str, str] | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    data = apply_env_overrides(data, env)
    if overrides:
        for key, value in overrides.items():
            if value is not None:
                data[key] = value
    return config_from_dict(data)


def write_config_echo(cfg: RunConfig, run_dir: Path) -> Path:
    run_dir.mkdir(parents=True, exist_ok=True)
    echo = run_dir / "config_echo.json"
    echo.write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")
    return echo


def synthesize_series(spec: SyntheticSpec, task: TaskConfig) -> tuple[TimeSeries, TimeSeries]:
    """Returns (coarse input, fine reference) for a synthetic spec."""
    n_fine = spec.n_windows * task.window_samples * task.factor
    fine_step = spec.input_step / task.factor
    total = np.zeros(n_fine)
    for comp in spec.components:
        wave = synth_waveform(
            comp.kind, n_fine, period=comp.period, amplitude=comp.amplitude, step=fine_step
        )
        total = total + wave.values
    if spec.noise_std > 0:
        total = total + np.random.default_rng(spec.seed).normal(0.0, spec.noise_std, n_fine)
    fine = TimeSeries(values=total, step=fine_step, name="synthetic")
    coarse = downsample(fine, task.factor, mode=spec.downsample_mode)
    return coarse, fine


def build_series(cfg: RunConfig) -> tuple[TimeSeries, TimeSeries | None]:
    """Input series plus optional fine reference, from CSV or synthetic spec."""
    if cfg.data.synthetic is not None:
        coarse, fine = synthesize_series(cfg.data.synthetic, cfg.task)
        return coarse, fine
    series = load_csv(cfg.data.csv, cfg.data.column, step_hint=cfg.data.step_hint)
    reference = None
    if cfg.data.reference_csv is not None:
        reference = load_csv(cfg.data.reference_csv, cfg.data.reference_column or cfg.data.column)
    return series, reference


def build_dataset(cfg: RunConfig) -> SeriesDataset:
    series, reference = build_series(cfg)
    task = ResamplingTask(factor=cfg.task.factor, window_samples=cfg.task.window_samples)
    return make_dataset(series, task, split_fraction=cfg.split_fraction, reference=reference)


def plans_from_config(cfg: RunConfig) -> dict[int, PhasePlan]:
    plans = {}
    for phase, section in ((1, cfg.phase1), (2, cfg.phase2), (3, cfg.phase3)):
        plans[phase] = PhasePlan(
            phase=phase,
            epochs=section.epochs,
            batch_size=section.batch_size,
            lr_generator=section.lr_generator,
            lr_discriminator=section.lr_discriminator,
            weight_decay=section.weight_decay,
            seed=cfg.seed,
            patience=section.patience,
            window_mode=cfg.window_mode,
        )
    return plans
