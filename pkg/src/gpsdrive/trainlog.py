"""Shared training-log schema for the policy-search algorithms."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

TRAIN_LOG_COLUMNS = [
    "iteration", "env_steps", "mean_cost", "kl", "lambda",
    "fit_residual", "wall_time_s",
]


@dataclass
class LogRow:
    iteration: int
    env_steps: int
    mean_cost: float
    kl: Optional[float]
    lam: Optional[float]
    fit_residual: Optional[float]
    wall_time_s: float


@dataclass
class TrainingLog:
    rows: list[LogRow] = field(default_factory=list)

    def append(self, row: LogRow) -> None:
        if self.rows and row.env_steps <= self.rows[-1].env_steps:
            raise ValueError("env_steps must be strictly increasing")
        self.rows.append(row)

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRAIN_LOG_COLUMNS)
            for r in self.rows:
                w.writerow(
                    [
                        r.iteration,
                        r.env_steps,
                        repr(float(r.mean_cost)),
                        "" if r.kl is None else repr(float(r.kl)),
                        "" if r.lam is None else repr(float(r.lam)),
                        "" if r.fit_residual is None else repr(float(r.fit_residual)),
                        f"{r.wall_time_s:.6f}",
                    ]
                )


def read_train_log(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRAIN_LOG_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"train log missing columns: {sorted(missing)}")
        return list(reader)
