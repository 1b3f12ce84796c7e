"""Figure rendering from run CSVs: training curves and top-down trajectories.

Rendering is a pure function of the input files: fixed style, no
timestamps, and a fixed SVG hash salt, so identical inputs produce
identical image bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "gpsdrive"

import matplotlib.pyplot as plt
import numpy as np

from .trainlog import TRAIN_LOG_COLUMNS

_SAVE_KWARGS = {"metadata": {"Date": None}}


class PlotDataError(ValueError):
    """Raised when an input CSV is empty or missing required columns."""


@dataclass
class PlotSpec:
    inputs: list[Path]
    labels: list[str]
    output: Path
    smoothing_window: int = 1
    fmt: str = "svg"
    negate: bool = False  # plot -cost as "reward"

    def __post_init__(self):
        self.inputs = [Path(p) for p in self.inputs]
        self.output = Path(self.output)
        if len(self.labels) != len(self.inputs):
            raise ValueError("labels count must equal inputs count")
        if self.smoothing_window < 1:
            raise ValueError("smoothing window must be >= 1")
        if self.fmt not in ("svg", "png"):
            raise ValueError("format must be svg or png")


def _read_columns(path: Path, required: list[str]) -> dict[str, np.ndarray]:
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        for col in required:
            if col not in names:
                raise PlotDataError(f"{path}: missing column {col!r}")
        rows = list(reader)
    if not rows:
        raise PlotDataError(f"{path}: no data rows")
    return {
        col: np.array([float(r[col]) if r[col] else np.nan for r in rows])
        for col in required
    }


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; a window of 1 returns the data unchanged."""
    if window <= 1:
        return values
    out = np.empty_like(values, dtype=float)
    for i in range(len(values)):
        out[i] = values[max(0, i - window + 1): i + 1].mean()
    return out


def _save(fig, output: Path, fmt: str) -> None:
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, format=fmt, **_SAVE_KWARGS)
    plt.close(fig)


def plot_training_curves(spec: PlotSpec) -> Path:
    """One figure, cost (or negated reward) vs env steps, one line per run."""
    series = [_read_columns(p, ["env_steps", "mean_cost"]) for p in spec.inputs]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for cols, label in zip(series, spec.labels):
        y = moving_average(cols["mean_cost"], spec.smoothing_window)
        if spec.negate:
            y = -y
        ax.plot(cols["env_steps"], y, label=label, linewidth=1.5)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("reward" if spec.negate else "mean trajectory cost")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, spec.output, spec.fmt)
    return spec.output


def plot_trajectory(
    trajectory_csvs: list[str | Path],
    path_csv: str | Path,
    output: str | Path,
    obstacle_csv: Optional[str | Path] = None,
    labels: Optional[list[str]] = None,
    fmt: str = "svg",
) -> Path:
    """Top-down X/Y view: reference path, ego traces, optional obstacle trace."""
    path_cols = _read_columns(Path(path_csv), ["X", "Y"])
    trajs = [_read_columns(Path(p), ["X", "Y"]) for p in trajectory_csvs]
    if labels is None:
        labels = [f"rollout {i}" for i in range(len(trajs))]
    if len(labels) != len(trajs):
        raise ValueError("labels count must equal trajectory count")

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(path_cols["X"], path_cols["Y"], "k--", linewidth=1.0, label="reference path")
    for cols, label in zip(trajs, labels):
        ax.plot(cols["X"], cols["Y"], linewidth=1.5, label=label)
    if obstacle_csv is not None:
        obs = _read_columns(Path(obstacle_csv), ["X", "Y"])
        ax.plot(obs["X"], obs["Y"], "r:", linewidth=2.0, label="obstacle")
        ax.plot(obs["X"][-1], obs["Y"][-1], "rs", markersize=6)
    ax.set_xlabel("X [m]")
    ax.set_ylabel("Y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    output = Path(output)
    _save(fig, output, fmt)
    return output


def main(argv=None) -> int:
    """Standalone plotting command over harness CSV outputs."""
    import argparse
    import sys

    parser = argparse.ArgumentParser(
        prog="gpsdrive-plot", description="Render figures from run CSVs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curves", help="training cost curves from train logs")
    p.add_argument("inputs", nargs="+", help="train_log.csv paths")
    p.add_argument("--labels", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--smooth", type=int, default=1, help="moving-average window")
    p.add_argument("--format", default="svg", choices=("svg", "png"))
    p.add_argument("--reward", action="store_true", help="plot negated cost")

    p = sub.add_parser("trajectory", help="top-down trajectory plot")
    p.add_argument("inputs", nargs="+", help="trajectory CSVs from eval")
    p.add_argument("--path", required=True, help="path geometry CSV")
    p.add_argument("--obstacle", default=None, help="obstacle trace CSV")
    p.add_argument("--labels", nargs="+", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--format", default="svg", choices=("svg", "png"))

    args = parser.parse_args(argv)
    try:
        if args.command == "curves":
            out = plot_training_curves(PlotSpec(
                inputs=args.inputs, labels=args.labels, output=args.out,
                smoothing_window=args.smooth, fmt=args.format, negate=args.reward,
            ))
        else:
            out = plot_trajectory(
                args.inputs, args.path, args.out,
                obstacle_csv=args.obstacle, labels=args.labels, fmt=args.format,
            )
    except (PlotDataError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())
