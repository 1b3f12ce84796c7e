"""Run-directory layout: every artifact a training run leaves behind.

A run directory is self-describing: the resolved config plus the log and
checkpoints are enough to re-evaluate or reproduce the run.
"""

from __future__ import annotations

from pathlib import Path

from .config import RunConfig, write_resolved_config
from .env import ScenarioSpec, write_path_csv
from .policy import LinearGaussianPolicy
from .trainlog import TrainingLog

RESOLVED_CONFIG = "resolved_config.yaml"
TRAIN_LOG = "train_log.csv"
CHECKPOINT_DIR = "checkpoints"
FINAL_CHECKPOINT = "final"
PATH_CSV = "path.csv"


def prepare_run_dir(config: RunConfig) -> Path:
    run_dir = config.output_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / CHECKPOINT_DIR).mkdir(exist_ok=True)
    write_resolved_config(config, run_dir / RESOLVED_CONFIG)
    write_path_csv(config.scenario.path, run_dir / PATH_CSV)
    return run_dir


def save_run(run_dir: Path, policy: LinearGaussianPolicy, log: TrainingLog,
             name: str = FINAL_CHECKPOINT) -> None:
    log.write_csv(run_dir / TRAIN_LOG)
    policy.save(run_dir / CHECKPOINT_DIR / name)


def checkpoint_path(run_dir: str | Path, name: str = FINAL_CHECKPOINT) -> Path:
    return Path(run_dir) / CHECKPOINT_DIR / name


def load_run_scenario(run_dir: str | Path) -> tuple[str, dict]:
    """Scenario kind and full resolved config of a completed run."""
    import yaml

    raw = yaml.safe_load((Path(run_dir) / RESOLVED_CONFIG).read_text())
    return raw["scenario"]["kind"], raw
