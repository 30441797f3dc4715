"""Three-phase training orchestration with per-phase best checkpoints.

Phase 1 pre-trains the generator on the combined data-consistency losses.
Phase 2 alternates discriminator steps (coarse inputs labeled real, generated
fine outputs labeled fake and detached) with generator steps that add the
feature-matching term. Phase 3 freezes the discriminator and keeps training
the generator against the frozen feature space, early-stopping when its test
loss stops beating the phase-2 best. Every epoch's test loss is computed in
the same self-supervised way as training: held-out reference windows are
guarded for the whole run and never touched.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .checkpoint import load_checkpoint, save_checkpoint
from .discriminator import Discriminator, DiscriminatorConfig
from .errors import DataError, NanLossError
from .generator import Generator, GeneratorConfig
from .losses import LossWeights, combine_total, loss_discriminator, loss_feature_matching, loss_gradient, loss_mse, loss_smoothness
from .metrics import MetricReport, metric_report
from .series import SeriesDataset

CORE_COMPONENTS = ("mse", "smoothness", "gradient")
ALL_COMPONENTS = CORE_COMPONENTS + ("feature_matching",)


def default_components(phase: int, keep_core_in_phase3: bool = True) -> tuple[str, ...]:
    if phase == 1:
        return CORE_COMPONENTS
    if phase == 2:
        return ALL_COMPONENTS
    if phase == 3:
        return ALL_COMPONENTS if keep_core_in_phase3 else ("feature_matching",)
    raise DataError(f"phase must be 1, 2 or 3, got {phase}")


@dataclass(frozen=True)
class PhasePlan:
    phase: int
    epochs: int
    batch_size: int = 8
    lr_generator: float = 1e-3
    lr_discriminator: float = 1e-4
    weight_decay: float = 1e-4
    seed: int = 0
    components: tuple[str, ...] | None = None
    patience: int = 5
    window_mode: str = "point"

    def __post_init__(self):
        if self.phase not in (1, 2, 3):
            raise DataError(f"phase must be 1, 2 or 3, got {self.phase}")
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.components is not None:
            object.__setattr__(self, "components", tuple(self.components))

    def resolved_components(self, keep_core_in_phase3: bool = True) -> tuple[str, ...]:
        if self.components is not None:
            return self.components
        return default_components(self.phase, keep_core_in_phase3)


@dataclass(frozen=True)
class EpochRecord:
    phase: int
    epoch: int
    train_total: float
    train_components: dict[str, float]
    test_total: float
    test_components: dict[str, float]
    disc_loss: Optional[float]
    wall_time: float


class RunHistory:
    """Per-epoch loss records plus a best-epoch marker per phase.

    Markers reset at phase boundaries: each phase's best is judged only
    against its own epochs.
    """

    def __init__(self):
        self.records: list[EpochRecord] = []
        self._best: dict[int, tuple[int, float]] = {}

    def append(self, record: EpochRecord) -> bool:
        """Store a record; returns True when it is the new best of its phase."""
        self.records.append(record)
        current = self._best.get(record.phase)
        if current is None or record.test_total < current[1]:
            self._best[record.phase] = (record.epoch, record.test_total)
            return True
        return False

    def rows(self, phase: int) -> list[EpochRecord]:
        return [r for r in self.records if r.phase == phase]

    def best_epoch(self, phase: int) -> int:
        if phase not in self._best:
            raise DataError(f"no epochs recorded for phase {phase}")
        return self._best[phase][0]

    def best_test_loss(self, phase: int) -> float:
        if phase not in self._best:
            raise DataError(f"no epochs recorded for phase {phase}")
        return self._best[phase][1]

    def to_csv(self, path) -> None:
        """history.csv: loss columns only, so identical runs give identical bytes."""
        names = sorted({n for r in self.records for n in r.train_components})
        header = ["phase", "epoch", "train_total", "test_total", "disc_loss"]
        header += [f"train_{n}" for n in names] + [f"test_{n}" for n in names] + ["best"]
        lines = [",".join(header)]
        for r in self.records:
            row = [str(r.phase), str(r.epoch), repr(r.train_total), repr(r.test_total),
                   "" if r.disc_loss is None else repr(r.disc_loss)]
            row += [repr(r.train_components[n]) if n in r.train_components else "" for n in names]
            row += [repr(r.test_components[n]) if n in r.test_components else "" for n in names]
            row.append("1" if self._best.get(r.phase, (None,))[0] == r.epoch else "0")
            lines.append(",".join(row))
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")


def select_best(history: RunHistory, phase: int) -> int:
    """Epoch with the minimal test loss inside one phase; ties go to the earliest."""
    rows = history.rows(phase)
    if not rows:
        raise DataError(f"no epochs recorded for phase {phase}")
    best = rows[0]
    for r in rows[1:]:
        if r.test_total < best.test_total:
            best = r
    return best.epoch


def should_early_stop(history: RunHistory, baseline_phase2_best: float, patience: int) -> bool:
    """True once `patience` consecutive phase-3 epochs fail to beat the phase-2 best."""
    consecutive = 0
    for r in history.rows(3):
        if r.test_total < baseline_phase2_best:
            consecutive = 0
        else:
            consecutive += 1
            if consecutive >= patience:
                return True
    return False


def _component_losses(
    x_out: torch.Tensor,
    x_in: torch.Tensor,
    factor: int,
    names: tuple[str, ...],
    window_mode: str,
    discriminator: Discriminator | None,
) -> dict[str, torch.Tensor]:
    comps: dict[str, torch.Tensor] = {}
    for name in names:
        if name == "mse":
            comps[name] = loss_mse(x_out, x_in, factor, window_mode)
        elif name == "smoothness":
            comps[name] = loss_smoothness(x_out)
        elif name == "gradient":
            comps[name] = loss_gradient(x_out, x_in, factor, window_mode)
        elif name == "feature_matching":
            if discriminator is None:
                raise DataError("feature_matching loss needs a discriminator")
            taps_in = discriminator.tapped_maps(x_in)
            taps_out = discriminator.tapped_maps(x_out)
            # per-channel mean keeps this term on the same scale as the
            # data-consistency losses regardless of feature width
            fm = sum(
                loss_feature_matching(a, b) / a.shape[-1] for a, b in zip(taps_in, taps_out)
            )
            comps[name] = fm
        else:
            raise DataError(f"unknown loss component {name!r}")
    return comps


def save_bundle(
    path,
    generator: Generator,
    weights: LossWeights,
    data: SeriesDataset,
    discriminator: Discriminator | None = None,
    phase: int | None = None,
    epoch: int | None = None,
    best_test_loss: float | None = None,
) -> None:
    """Best-model checkpoint: everything needed to upsample a raw series later."""
    save_checkpoint(path, kind="bundle", payload={
        "phase": phase,
        "epoch": epoch,
        "best_test_loss": best_test_loss,
        "generator_config": asdict(generator.cfg),
        "generator_state": generator.state_dict(),
        "loss_weight_names": list(weights.names),
        "loss_weights_state": weights.state_dict(),
        "discriminator_config": None if discriminator is None else asdict(discriminator.cfg),
        "discriminator_state": None if discriminator is None else discriminator.state_dict(),
        "normalization": {"mean": data.norm.mean, "std": data.norm.std},
        "task": {"factor": data.task.factor, "window_samples": data.task.window_samples},
        "input_step": data.input_step,
    })


def load_bundle(path):
    """Returns (generator, weights, discriminator_or_None, meta dict)."""
    record = load_checkpoint(path, expect_kind="bundle")
    generator = Generator(GeneratorConfig(**record["generator_config"]))
    generator.load_state_dict(record["generator_state"])
    weights = LossWeights(record["loss_weight_names"])
    weights.load_state_dict(record["loss_weights_state"])
    discriminator = None
    if record["discriminator_config"] is not None:
        discriminator = Discriminator(DiscriminatorConfig(**record["discriminator_config"]))
        discriminator.load_state_dict(record["discriminator_state"])
    meta = {
        "phase": record["phase"],
        "epoch": record["epoch"],
        "best_test_loss": record.get("best_test_loss"),
        "normalization": record["normalization"],
        "task": record["task"],
        "input_step": record["input_step"],
    }
    return generator, weights, discriminator, meta


def _split_tensors(data: SeriesDataset, split: str, dtype) -> tuple[torch.Tensor, torch.Tensor]:
    inputs, inits = data.split_arrays(split)
    return torch.as_tensor(inputs, dtype=dtype), torch.as_tensor(inits, dtype=dtype)


def run_phase(
    plan: PhasePlan,
    generator: Generator,
    weights: LossWeights,
    data: SeriesDataset,
    discriminator: Discriminator | None = None,
    out_dir: Path | str | None = None,
    history: RunHistory | None = None,
    phase2_best: float | None = None,
    keep_core_in_phase3: bool = True,
) -> tuple[Optional[Path], RunHistory]:
    """Train one phase; returns (best checkpoint path or None, history).

    Reference windows are guarded for the entire phase, so any loss-path read
    of held-out data raises instead of silently leaking.
    """
    if plan.phase in (2, 3) and discriminator is None:
        raise DataError(f"phase {plan.phase} requires a discriminator")
    if plan.phase == 3 and phase2_best is None:
        raise DataError("phase 3 requires the phase-2 best test loss as its early-stop baseline")
    if len(data.train) == 0 or len(data.test) == 0:
        raise DataError("dataset has an empty split")

    history = history if history is not None else RunHistory()
    factor = data.task.factor
    names = plan.resolved_components(keep_core_in_phase3)
    dtype = next(generator.parameters()).dtype

    torch.manual_seed(plan.seed)
    shuffle_rng = torch.Generator().manual_seed(plan.seed)

    gen_params = list(generator.parameters()) + list(weights.parameters())
    gen_opt = torch.optim.AdamW(gen_params, lr=plan.lr_generator, weight_decay=plan.weight_decay)
    disc_opt = None
    if plan.phase == 2:
        disc_opt = torch.optim.AdamW(
            discriminator.parameters(), lr=plan.lr_discriminator, weight_decay=plan.weight_decay
        )
    if plan.phase == 3:
        for p in discriminator.parameters():
            p.requires_grad_(False)

    train_in, train_init = _split_tensors(data, "train", dtype)
    test_in, test_init = _split_tensors(data, "test", dtype)
    n_train = train_in.shape[0]

    best_path: Optional[Path] = None
    if out_dir is not None:
        best_path = Path(out_dir) / f"phase{plan.phase}" / "best.ckpt"
    last_saved: Optional[Path] = None

    def check_finite(value: torch.Tensor, what: str):
        if not torch.isfinite(value):
            raise NanLossError(f"{what} became non-finite in phase {plan.phase}", last_checkpoint=last_saved)

    with data.guard_references():
        for epoch in range(1, plan.epochs + 1):
            tic = time.perf_counter()
            generator.train()
            if discriminator is not None:
                discriminator.train()
            order = torch.randperm(n_train, generator=shuffle_rng)
            train_totals = []
            disc_losses = []
            for lo in range(0, n_train, plan.batch_size):
                idx = order[lo : lo + plan.batch_size]
                x_in = train_in[idx]
                x_init = train_init[idx]

                if plan.phase == 2:
                    with torch.no_grad():
                        x_fake = generator(x_in, x_init)
                    p_real = discriminator(x_in)
                    p_fake = discriminator(x_fake)
                    d_loss = loss_discriminator(p_real, p_fake)
                    check_finite(d_loss, "discriminator loss")
                    disc_opt.zero_grad()
                    d_loss.backward()
                    disc_opt.step()
                    disc_losses.append(float(d_loss.detach()))

                x_out = generator(x_in, x_init)
                comps = _component_losses(x_out, x_in, factor, names, plan.window_mode, discriminator)
                breakdown = combine_total(comps, weights)
                check_finite(breakdown.total, "generator loss")
                gen_opt.zero_grad()
                if discriminator is not None:
                    discriminator.zero_grad(set_to_none=True)
                breakdown.total.backward()
                gen_opt.step()
                train_totals.append((breakdown.total_value, breakdown.as_dict()))

            generator.eval()
            if discriminator is not None:
                discriminator.eval()
            with torch.no_grad():
                test_out = generator(test_in, test_init)
                test_comps = _component_losses(test_out, test_in, factor, names, plan.window_mode, discriminator)
                test_breakdown = combine_total(test_comps, weights)
            check_finite(test_breakdown.total, "test loss")

            train_total = float(np.mean([t for t, _ in train_totals]))
            train_comps = {
                n: float(np.mean([c[n] for _, c in train_totals])) for n in names
            }
            record = EpochRecord(
                phase=plan.phase,
                epoch=epoch,
                train_total=train_total,
                train_components=train_comps,
                test_total=test_breakdown.total_value,
                test_components=test_breakdown.as_dict(),
                disc_loss=float(np.mean(disc_losses)) if disc_losses else None,
                wall_time=time.perf_counter() - tic,
            )
            improved = history.append(record)
            if improved and best_path is not None:
                save_bundle(
                    best_path, generator, weights, data,
                    discriminator=discriminator if plan.phase >= 2 else None,
                    phase=plan.phase, epoch=epoch,
                    best_test_loss=record.test_total,
                )
                last_saved = best_path

            if plan.phase == 3 and should_early_stop(history, phase2_best, plan.patience):
                break

    return best_path, history


def train_phases(
    data: SeriesDataset,
    generator_cfg: GeneratorConfig,
    discriminator_cfg: DiscriminatorConfig,
    plans: dict[int, PhasePlan],
    out_dir: Path | str,
    seed: int = 0,
    keep_core_in_phase3: bool = True,
    phases: tuple[int, ...] = (1, 2, 3),
) -> tuple[RunHistory, dict[int, Path]]:
    """Chain the requested phases, reloading each phase's best bundle before the next.

    When the sequence starts past phase 1, the previous phase's best bundle
    must already exist under out_dir; its state seeds the run and (for a
    standalone phase 3) supplies the early-stop baseline.
    """
    out_dir = Path(out_dir)
    torch.manual_seed(seed)
    generator = Generator(generator_cfg)
    weights = LossWeights(ALL_COMPONENTS)
    discriminator = Discriminator(discriminator_cfg)

    history = RunHistory()
    best_paths: dict[int, Path] = {}
    phase2_best: float | None = None

    first = min(phases)
    if first > 1:
        prev_path = out_dir / f"phase{first - 1}" / "best.ckpt"
        if not prev_path.exists():
            raise DataError(f"phase {first} needs {prev_path} from phase {first - 1} first")
        gen_prev, weights_prev, disc_prev, meta = load_bundle(prev_path)
        generator.load_state_dict(gen_prev.state_dict())
        weights.load_state_dict(weights_prev.state_dict())
        if disc_prev is not None:
            discriminator.load_state_dict(disc_prev.state_dict())
        if first == 3:
            if meta["best_test_loss"] is None:
                raise DataError(f"{prev_path} lacks its best test loss; re-run phase 2")
            phase2_best = float(meta["best_test_loss"])

    for phase in sorted(phases):
        plan = plans[phase]
        if plan.phase != phase:
            raise DataError(f"plan for phase {phase} says phase {plan.phase}")
        path, history = run_phase(
            plan, generator, weights, data,
            discriminator=discriminator if phase >= 2 else None,
            out_dir=out_dir, history=history,
            phase2_best=phase2_best if phase == 3 else None,
            keep_core_in_phase3=keep_core_in_phase3,
        )
        best_paths[phase] = path
        # next phase starts from this phase's best state, not its last
        generator_best, weights_best, disc_best, _ = load_bundle(path)
        generator.load_state_dict(generator_best.state_dict())
        weights.load_state_dict(weights_best.state_dict())
        if disc_best is not None:
            discriminator.load_state_dict(disc_best.state_dict())
        if phase == 2:
            phase2_best = history.best_test_loss(2)
        history.to_csv(out_dir / "history.csv")

    return history, best_paths


def predict_split(generator: Generator, data: SeriesDataset, split: str) -> np.ndarray:
    """Denormalized generator outputs for every window of one split, shape (n, W*factor)."""
    dtype = next(generator.parameters()).dtype
    inputs, inits = _split_tensors(data, split, dtype)
    generator.eval()
    with torch.no_grad():
        out = generator(inputs, inits)
    return data.norm.denormalize(out.numpy().astype(np.float64))


def evaluate_split(generator: Generator, data: SeriesDataset, split: str) -> MetricReport:
    """Metrics of the generated fine series against the held-out reference.

    Evaluation-only: reference windows are read outside any guard.
    """
    if not data.has_reference:
        raise DataError("dataset has no reference windows to evaluate against")
    pred = predict_split(generator, data, split).ravel()
    examples = data.train if split == "train" else data.test
    ref = np.concatenate([data.norm.denormalize(ex.reference) for ex in examples])
    return metric_report(pred, ref)
