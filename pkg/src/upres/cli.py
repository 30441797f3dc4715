"""Command-line surface: dataset prep, training, upsampling, evaluation, reports.

Every command exits 0 on success and a categorized nonzero code otherwise
(2 config, 3 data, 4 checkpoint, 5 other package errors). Artifacts land
under <out_dir>/<name>/ and are byte-identical across reruns with the same
config and seed.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import baselines
from .config import RunConfig, build_dataset, load_config, plans_from_config, write_config_echo
from .errors import CheckpointError, ConfigError, DataError, DegenerateInputError, UpresError
from .metrics import metric_report, paired_significance, pcc
from .series import ResamplingTask, TimeSeries, load_csv
from .training import evaluate_split, load_bundle, predict_split, train_phases

ABLATION_MODES = ("SELF", "CONV", "S+C", "S_C")


def _float_cell(x: float) -> str:
    return repr(float(x))


def _write_lines(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def _load_run_config(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("this command needs --config")
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    return load_config(args.config, overrides=overrides)


def _write_series_csv(path: Path, s: TimeSeries, column: str) -> None:
    lines = [f"timestamp,{column}"]
    for t, v in zip(s.times, s.values):
        lines.append(f"{repr(float(t))},{repr(float(v))}")
    _write_lines(path, lines)


def _default_column(path: Path) -> str:
    frame = pd.read_csv(path, nrows=1)
    if frame.shape[1] < 2:
        raise DataError(f"{path}: expected a timestamp column plus a value column")
    return frame.columns[1]


def cmd_prepare(args) -> int:
    cfg = _load_run_config(args)
    data = build_dataset(cfg)
    run_dir = cfg.run_dir
    write_config_echo(cfg, run_dir)
    train_in, train_init = data.split_arrays("train")
    test_in, test_init = data.split_arrays("test")
    cache = run_dir / "dataset.npz"
    cache.parent.mkdir(parents=True, exist_ok=True)
    with open(cache, "wb") as fh:
        np.savez(fh, train_inputs=train_in, train_inits=train_init,
                 test_inputs=test_in, test_inits=test_init)
    meta = {
        "factor": data.task.factor,
        "window_samples": data.task.window_samples,
        "input_step": data.input_step,
        "normalization": {"mean": data.norm.mean, "std": data.norm.std},
        "n_train": len(data.train),
        "n_test": len(data.test),
        "has_reference": data.has_reference,
    }
    (run_dir / "dataset_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"prepared {len(data.train)} train / {len(data.test)} test windows -> {cache}")
    return 0


def _parse_phases(value: str) -> tuple[int, ...]:
    if value == "all":
        return (1, 2, 3)
    try:
        phase = int(value)
    except ValueError:
        raise ConfigError(f"--phase must be 1, 2, 3 or 'all', got {value!r}")
    if phase not in (1, 2, 3):
        raise ConfigError(f"--phase must be 1, 2, 3 or 'all', got {value!r}")
    return (phase,)


def _write_audit(data, run_dir: Path) -> None:
    report = data.audit_report()
    report["clean"] = report["guarded_access_attempts"] == 0
    (run_dir / "audit.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    phases = _parse_phases(args.phase)
    data = build_dataset(cfg)
    run_dir = cfg.run_dir
    write_config_echo(cfg, run_dir)
    history, best_paths = train_phases(
        data, cfg.generator, cfg.discriminator, plans_from_config(cfg),
        out_dir=run_dir, seed=cfg.seed, keep_core_in_phase3=cfg.phase3_keep_core,
        phases=phases,
    )
    _write_audit(data, run_dir)
    for phase in phases:
        print(f"phase {phase}: best epoch {history.best_epoch(phase)}"
              f" test loss {history.best_test_loss(phase):.6f} -> {best_paths[phase]}")
    return 0


def cmd_upsample(args) -> int:
    generator, _, _, meta = load_bundle(args.checkpoint)
    column = args.column or _default_column(Path(args.input))
    series = load_csv(args.input, column)
    task = ResamplingTask(factor=meta["task"]["factor"], window_samples=meta["task"]["window_samples"])
    w = task.window_samples
    if len(series) % w != 0:
        raise DataError(f"input length {len(series)} is not a multiple of the window size {w}")
    mean, std = meta["normalization"]["mean"], meta["normalization"]["std"]
    out_values = []
    for i in range(len(series) // w):
        window = TimeSeries(
            values=(series.values[i * w : (i + 1) * w] - mean) / std,
            step=series.step,
            start_time=series.start_time + i * w * series.step,
        )
        fine = generator.generate(window, task)
        out_values.append(fine.values * std + mean)
    out = TimeSeries(
        values=np.concatenate(out_values),
        step=series.step / task.factor,
        start_time=series.start_time,
        name=column,
    )
    _write_series_csv(Path(args.output), out, column)
    print(f"wrote {len(out)} rows at step {out.step:g} s -> {args.output}")
    return 0


def cmd_evaluate(args) -> int:
    ref_column = args.column or _default_column(Path(args.ref))
    ref = load_csv(args.ref, ref_column)
    rows = []
    for item in args.pred:
        if "=" in item:
            name, path = item.split("=", 1)
        else:
            name, path = Path(item).stem, item
        col = args.column or _default_column(Path(path))
        pred = load_csv(path, col)
        if len(pred) != len(ref):
            raise DataError(f"{path}: {len(pred)} rows vs reference {len(ref)}")
        from .metrics import mae as mae_fn, rmse as rmse_fn
        r, m = rmse_fn(pred.values, ref.values), mae_fn(pred.values, ref.values)
        try:
            p = _float_cell(pcc(pred.values, ref.values))
        except DegenerateInputError as exc:
            p = f"error:{exc}"
        rows.append((name, _float_cell(r), _float_cell(m), p, str(len(ref))))
    lines = ["method,rmse,mae,pcc,n"] + [",".join(row) for row in rows]
    if args.out:
        _write_lines(Path(args.out), lines)
    print("\n".join(lines))
    return 0


def _static_predictions(data, which: str, split: str) -> np.ndarray:
    """Baseline fine-grid predictions for every window of a split, raw units."""
    inputs, inits = data.split_arrays(split)
    preds = []
    for i in range(inputs.shape[0]):
        raw = TimeSeries(values=data.norm.denormalize(inputs[i]), step=data.input_step)
        if which == "linear":
            preds.append(data.norm.denormalize(inits[i]))
        else:
            preds.append(baselines.upsample_gp(raw, data.task.factor).values)
    return np.concatenate(preds)


def _reference_values(data, split: str) -> np.ndarray:
    examples = data.train if split == "train" else data.test
    return np.concatenate([data.norm.denormalize(ex.reference) for ex in examples])


def cmd_ablate(args) -> int:
    cfg = _load_run_config(args)
    data = build_dataset(cfg)
    if not data.has_reference:
        raise DataError("ablate needs a dataset with a fine-resolution reference")
    run_dir = cfg.run_dir
    write_config_echo(cfg, run_dir)

    results = {}  # (metric, phase_label, mode) -> {split: value}
    for mode in ABLATION_MODES:
        gen_cfg = dataclasses.replace(cfg.generator, attention_mode=mode)
        mode_dir = run_dir / mode
        history, best_paths = train_phases(
            data, gen_cfg, cfg.discriminator, plans_from_config(cfg),
            out_dir=mode_dir, seed=cfg.seed, keep_core_in_phase3=cfg.phase3_keep_core,
        )
        for phase, path in best_paths.items():
            generator, _, _, _ = load_bundle(path)
            for split in ("train", "test"):
                report = evaluate_split(generator, data, split)
                results.setdefault(("rmse", f"phase{phase}", mode), {})[split] = report.rmse
                results.setdefault(("pcc", f"phase{phase}", mode), {})[split] = report.pcc
        print(f"{mode}: trained 3 phases, best test losses "
              + " ".join(f"p{k}={history.best_test_loss(k):.4f}" for k in (1, 2, 3)))

    for method in ("linear", "gauss"):
        for split in ("train", "test"):
            pred = _static_predictions(data, method, split)
            ref = _reference_values(data, split)
            report = metric_report(pred, ref)
            results.setdefault(("rmse", "static", method), {})[split] = report.rmse
            results.setdefault(("pcc", "static", method), {})[split] = report.pcc

    lines = ["metric,phase,method,train,test"]
    for (metric, phase_label, method), cells in results.items():
        lines.append(
            f"{metric},{phase_label},{method},{_float_cell(cells['train'])},{_float_cell(cells['test'])}"
        )
    grid = run_dir / "ablation_grid.csv"
    _write_lines(grid, lines)
    _write_audit(data, run_dir)
    print(f"wrote {grid}")
    return 0


def _read_runs(path: Path, column: str | None) -> np.ndarray:
    frame = pd.read_csv(path)
    if column is not None:
        if column not in frame.columns:
            raise DataError(f"{path}: missing column {column!r}")
        values = frame[column]
    else:
        numeric = frame.select_dtypes("number")
        if numeric.shape[1] == 0:
            raise DataError(f"{path}: no numeric column found")
        values = numeric.iloc[:, 0]
    return values.to_numpy(dtype=np.float64)


def cmd_significance(args) -> int:
    a = _read_runs(Path(args.runs_a), args.column)
    b = _read_runs(Path(args.runs_b), args.column)
    result = paired_significance(a, b)
    payload = {"p_value": result.p_value, "mean_diff": result.mean_diff, "n_runs": result.n_runs}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        _write_lines(Path(args.out), [text])
    print(text)
    return 0


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cfg = _load_run_config(args)
    data = build_dataset(cfg)
    split, index = args.split, args.window
    examples = data.train if split == "train" else data.test
    if not (0 <= index < len(examples)):
        raise DataError(f"window {index} out of range for {split} split of {len(examples)}")
    ex = examples[index]
    raw_in = data.norm.denormalize(ex.x_in)
    factor = data.task.factor
    coarse = TimeSeries(values=raw_in, step=data.input_step)
    t_fine = np.arange(len(raw_in) * factor) * (data.input_step / factor)

    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(coarse.times, raw_in, "ko", markersize=3, label="input anchors")
    ax.plot(t_fine, data.norm.denormalize(ex.x_init), color="tab:gray", lw=0.8, label="linear")
    ax.plot(t_fine, baselines.upsample_gp(coarse, factor).values, color="tab:green", lw=0.8, label="gauss")
    if args.checkpoint:
        generator, _, _, _ = load_bundle(args.checkpoint)
        pred = predict_split(generator, data, split)[index]
        ax.plot(t_fine, pred, color="tab:blue", lw=1.2, label="model")
    if data.has_reference:
        ax.plot(t_fine, data.norm.denormalize(ex.reference), color="tab:orange", lw=0.8, label="reference")
    ax.set_xlabel("seconds")
    ax.set_ylabel(coarse.name or "value")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    out = Path(args.out or (cfg.run_dir / f"plot_{split}_{index}.png"))
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="upres", description="Self-supervised time-series upsampling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory / file")

    p = sub.add_parser("prepare", help="build and cache the windowed dataset")
    common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="run training phases")
    common(p)
    p.add_argument("--phase", default="all", help="1, 2, 3 or all")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("upsample", help="upsample a CSV with a trained checkpoint")
    common(p, config=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="coarse input CSV")
    p.add_argument("--column", default=None, help="value column (default: first value column)")
    p.add_argument("--output", required=True, help="fine output CSV path")
    p.set_defaults(func=cmd_upsample)

    p = sub.add_parser("evaluate", help="score prediction CSVs against a reference CSV")
    common(p, config=False)
    p.add_argument("--pred", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--ref", required=True)
    p.add_argument("--column", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train every attention mode and emit the metric grid")
    common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("significance", help="paired t-test between two run-metric files")
    common(p, config=False)
    p.add_argument("--runs-a", required=True)
    p.add_argument("--runs-b", required=True)
    p.add_argument("--column", default=None)
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("plot", help="overlay input, predictions, baselines and reference")
    common(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--window", type=int, default=0)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error[data]: {exc}", file=sys.stderr)
        return 3
    except CheckpointError as exc:
        print(f"error[checkpoint]: {exc}", file=sys.stderr)
        return 4
    except UpresError as exc:
        print(f"error[internal]: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
