"""Command-line entry points: train, eval, compare, export-traj.

Exit codes: 0 success, 2 configuration error, 3 runtime divergence.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import cem as cem_mod
from . import gps as gps_mod
from .config import ConfigError, load_config
from .costs import CostParams
from .env import (
    DrivingEnv, ObstacleSpec, ScenarioSpec, write_obstacle_csv,
    write_path_csv, write_trajectory_csv,
)
from .evaluate import evaluate_policy
from .policy import LinearGaussianPolicy
from .runio import checkpoint_path, load_run_scenario, prepare_run_dir, save_run
from .track import PATH_KINDS
from .trainlog import TRAIN_LOG_COLUMNS, read_train_log
from .vehicle import SimulationDiverged

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _scenario_from_flags(args) -> ScenarioSpec:
    obstacle = None
    if getattr(args, "obstacle", False):
        obstacle = ObstacleSpec()
    return ScenarioSpec(kind=args.scenario, v_ref=args.v_ref, obstacle=obstacle)


def cmd_train(args) -> int:
    config = load_config(args.config, default_output=args.out)
    if args.out is not None:
        config.output_dir = Path(args.out)
    run_dir = prepare_run_dir(config)
    if config.algorithm == "gps":
        if config.mixed:
            policies, log, _ = gps_mod.train_mixed(config.gps)
            for kind, pol in policies.items():
                pol.save(run_dir / "checkpoints" / f"final_{kind}")
            log.write_csv(run_dir / "train_log.csv")
            policy = policies[config.scenario.kind]
            policy.save(run_dir / "checkpoints" / "final")
        else:
            policy, log, _ = gps_mod.train(config.gps)
            save_run(run_dir, policy, log)
    else:
        policy, log = cem_mod.cem_train(config.cem)
        save_run(run_dir, policy, log)
    print(f"run complete: {run_dir}")
    print(f"iterations logged: {len(log.rows)}")
    return EXIT_OK


def cmd_eval(args) -> int:
    scenario = _scenario_from_flags(args)
    policy = LinearGaussianPolicy.load(args.checkpoint)
    report, trajectories = evaluate_policy(
        policy, scenario, CostParams(v_ref=scenario.v_ref),
        n_rollouts=args.rollouts, seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for j, traj in enumerate(trajectories):
        write_trajectory_csv(traj, out / f"rollout_{j:02d}.csv")
    report.write_csv(out / "summary.csv")
    write_path_csv(scenario.path, out / "path.csv")
    if scenario.obstacle is not None:
        write_obstacle_csv(
            trajectories[0], scenario.path, scenario.obstacle.lateral_offset,
            out / "obstacle.csv",
        )
    for line in report.summary_lines(scenario.v_ref):
        print(line)
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.runs) < 2:
        print("compare needs at least 2 run directories", file=sys.stderr)
        return EXIT_CONFIG
    kinds, logs, labels = [], [], []
    for run in args.runs:
        kind, resolved = load_run_scenario(run)
        kinds.append(kind)
        labels.append(resolved["algorithm"])
        logs.append(read_train_log(Path(run) / "train_log.csv"))
    if len(set(kinds)) != 1:
        print(f"runs use different scenarios: {kinds}", file=sys.stderr)
        return EXIT_CONFIG
    # Deduplicate labels so every curve gets its own column.
    seen: dict[str, int] = {}
    for i, label in enumerate(labels):
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            labels[i] = f"{label}_{seen[label]}"

    axis = sorted({int(row["env_steps"]) for log in logs for row in log})
    out = Path(args.out)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["env_steps"] + [f"mean_cost_{lab}" for lab in labels])
        for step in axis:
            row = [step]
            for log in logs:
                # Forward-fill: most recent logged cost at or before this step.
                past = [r for r in log if int(r["env_steps"]) <= step]
                row.append(past[-1]["mean_cost"] if past else "")
            w.writerow(row)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_export_traj(args) -> int:
    scenario = _scenario_from_flags(args)
    if args.checkpoint is not None:
        policy = LinearGaussianPolicy.load(args.checkpoint)
    else:
        policy = gps_mod.init_policy_pd(scenario)
    env = DrivingEnv(scenario, CostParams(v_ref=scenario.v_ref))
    traj = env.rollout(
        policy, np.random.SeedSequence(entropy=args.seed, spawn_key=(0,)),
        stochastic=not args.deterministic,
    )
    write_trajectory_csv(traj, args.out)
    if args.path_out:
        write_path_csv(scenario.path, args.path_out)
    if args.obstacle_out:
        if scenario.obstacle is None:
            print("--obstacle-out requires --obstacle", file=sys.stderr)
            return EXIT_CONFIG
        write_obstacle_csv(
            traj, scenario.path, scenario.obstacle.lateral_offset, args.obstacle_out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpsdrive",
        description="Model-based policy search for simulated lane driving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a policy from a YAML config")
    p.add_argument("--config", required=True, help="path to YAML run config")
    p.add_argument("--out", default=None, help="override output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint with noise-free rollouts")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--scenario", default="straight", choices=PATH_KINDS)
    p.add_argument("--obstacle", action="store_true", help="add the front vehicle")
    p.add_argument("--v-ref", type=float, default=5.0)
    p.add_argument("--rollouts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="directory for evaluation CSVs")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="merge train logs onto a shared step axis")
    p.add_argument("runs", nargs="*", help="completed run directories")
    p.add_argument("--out", required=True, help="output comparison CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-traj", help="roll out a policy and export the CSV")
    p.add_argument("--checkpoint", default=None,
                   help="checkpoint directory (default: PD initialization)")
    p.add_argument("--scenario", default="straight", choices=PATH_KINDS)
    p.add_argument("--obstacle", action="store_true")
    p.add_argument("--v-ref", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true", help="mean policy, no noise")
    p.add_argument("--out", required=True, help="output trajectory CSV")
    p.add_argument("--path-out", default=None, help="also export path geometry CSV")
    p.add_argument("--obstacle-out", default=None, help="also export obstacle trace CSV")
    p.set_defaults(func=cmd_export_traj)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationDiverged, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"runtime divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
