"""Emit a coarse/fine CSV pair from the synthetic waveform mixture.

The fine series is the ground truth; the coarse file is its downsampled
version, which is what the training pipeline actually consumes. Handy for
exercising the CSV ingestion path end to end:

    python scripts/make_smoke_data.py --out-dir data --days 10 --factor 3
"""
import argparse
from pathlib import Path

from upres.config import SyntheticSpec, TaskConfig, WaveComponent, synthesize_series


def write_csv(path: Path, series, column: str) -> None:
    lines = [f"timestamp,{column}"]
    for t, v in zip(series.times, series.values):
        lines.append(f"{float(t)!r},{float(v)!r}")
    path.write_text("\n".join(lines) + "\n")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="data")
    parser.add_argument("--days", type=int, default=10, help="number of one-day windows")
    parser.add_argument("--factor", type=int, default=3)
    parser.add_argument("--step", type=float, default=900.0, help="coarse step in seconds")
    parser.add_argument("--noise", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    spec = SyntheticSpec(
        components=(
            WaveComponent(kind="sine", period=96 * args.factor, amplitude=1.0),
            WaveComponent(kind="sine", period=20, amplitude=0.35),
            WaveComponent(kind="square", period=160, amplitude=0.5),
        ),
        n_windows=args.days,
        input_step=args.step,
        noise_std=args.noise,
        seed=args.seed,
    )
    task = TaskConfig(factor=args.factor, window_samples=96)
    coarse, fine = synthesize_series(spec, task)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "coarse.csv", coarse, "load")
    write_csv(out / "fine.csv", fine, "load")
    print(f"wrote {out / 'coarse.csv'} ({len(coarse)} rows @ {coarse.step:g} s)")
    print(f"wrote {out / 'fine.csv'} ({len(fine)} rows @ {fine.step:g} s)")


if __name__ == "__main__":
    main()
