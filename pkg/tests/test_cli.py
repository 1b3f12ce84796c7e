"""End-to-end CLI tests: exit codes, produced artifacts, and rerun
determinism, all through main(argv)."""

import csv
from pathlib import Path

import numpy as np
import pytest
import yaml

from gpsdrive.cli import EXIT_CONFIG, EXIT_OK, main
from gpsdrive.runio import RESOLVED_CONFIG, TRAIN_LOG, checkpoint_path
from gpsdrive.trainlog import TRAIN_LOG_COLUMNS


def write_config(path, **overrides):
    raw = {
        "algorithm": "gps",
        "seed": 0,
        "scenario": {"kind": "straight"},
        "gps": {"iterations": 2},
    }
    raw.update(overrides)
    path.write_text(yaml.safe_dump(raw))
    return path


@pytest.fixture()
def trained_run(tmp_path):
    cfg = write_config(tmp_path / "run.yaml")
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    return out


def read_csv(path):
    with Path(path).open() as fh:
        return list(csv.DictReader(fh))


def test_train_writes_run_directory(trained_run):
    assert (trained_run / RESOLVED_CONFIG).is_file()
    assert (trained_run / TRAIN_LOG).is_file()
    assert (checkpoint_path(trained_run) / "manifest.json").is_file()
    assert (trained_run / "path.csv").is_file()
    rows = read_csv(trained_run / TRAIN_LOG)
    assert len(rows) == 2
    assert list(rows[0]) == TRAIN_LOG_COLUMNS


def test_train_rerun_is_bitwise_identical_except_wall_time(tmp_path):
    cfg = write_config(tmp_path / "run.yaml")
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["train", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        outs.append(out)
    a, b = outs
    resolved_a = yaml.safe_load((a / RESOLVED_CONFIG).read_text())
    resolved_b = yaml.safe_load((b / RESOLVED_CONFIG).read_text())
    del resolved_a["output_dir"], resolved_b["output_dir"]
    assert resolved_a == resolved_b
    for fname in ("K.npy", "k.npy", "C.npy"):
        assert (checkpoint_path(a) / fname).read_bytes() == \
            (checkpoint_path(b) / fname).read_bytes()
    rows_a, rows_b = read_csv(a / TRAIN_LOG), read_csv(b / TRAIN_LOG)
    for ra, rb in zip(rows_a, rows_b):
        for col in TRAIN_LOG_COLUMNS:
            if col != "wall_time_s":
                assert ra[col] == rb[col]


def test_train_cem(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", algorithm="cem", cem={"iterations": 2})
    out = tmp_path / "cem_run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / TRAIN_LOG)
    assert len(rows) == 2
    assert rows[0]["kl"] == ""


def test_train_mixed(tmp_path):
    cfg = write_config(tmp_path / "m.yaml", mixed=True)
    out = tmp_path / "mixed_run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    for kind in ("straight", "turn90", "roundabout"):
        assert (out / "checkpoints" / f"final_{kind}" / "manifest.json").is_file()
    assert (checkpoint_path(out) / "manifest.json").is_file()


def test_train_bad_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(yaml.safe_dump({"algorithm": "gps", "seed": 0,
                                   "output_dir": "x",
                                   "scenario": {"kind": "zigzag"}}))
    assert main(["train", "--config", str(cfg)]) == EXIT_CONFIG
    assert "scenario.kind" in capsys.readouterr().err


def test_train_missing_config_file_exits_2(tmp_path):
    assert main(["train", "--config", str(tmp_path / "nope.yaml"),
                 "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_eval_writes_rollouts_and_summary(trained_run, tmp_path, capsys):
    out = tmp_path / "eval"
    assert main(["eval", "--checkpoint", str(checkpoint_path(trained_run)),
                 "--out", str(out), "--rollouts", "3"]) == EXIT_OK
    assert sorted(p.name for p in out.glob("rollout_*.csv")) == \
        ["rollout_00.csv", "rollout_01.csv", "rollout_02.csv"]
    summary = read_csv(out / "summary.csv")
    assert len(summary) == 3
    assert (out / "path.csv").is_file()
    assert "collisions: 0/3" in capsys.readouterr().out


def test_eval_obstacle_checkpoint_mismatch_exits_2(trained_run, tmp_path):
    # straight checkpoint has 3 observation dims; obstacle mode needs 5
    assert main(["eval", "--checkpoint", str(checkpoint_path(trained_run)),
                 "--obstacle", "--out", str(tmp_path / "e")]) == EXIT_CONFIG


def test_eval_missing_checkpoint_exits_2(tmp_path):
    assert main(["eval", "--checkpoint", str(tmp_path / "none"),
                 "--out", str(tmp_path / "e")]) == EXIT_CONFIG


def test_compare_merges_runs(trained_run, tmp_path):
    cfg = write_config(tmp_path / "c.yaml", algorithm="cem", cem={"iterations": 3})
    other = tmp_path / "cem_run"
    assert main(["train", "--config", str(cfg), "--out", str(other)]) == EXIT_OK
    out = tmp_path / "compare.csv"
    assert main(["compare", str(trained_run), str(other),
                 "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert list(rows[0]) == ["env_steps", "mean_cost_gps", "mean_cost_cem"]
    steps = [int(r["env_steps"]) for r in rows]
    assert steps == sorted(steps)
    # forward-fill: the last row carries a value for every curve
    assert rows[-1]["mean_cost_gps"] != "" and rows[-1]["mean_cost_cem"] != ""


def test_compare_duplicate_labels_are_suffixed(trained_run, tmp_path):
    out = tmp_path / "cmp.csv"
    assert main(["compare", str(trained_run), str(trained_run),
                 "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert list(rows[0]) == ["env_steps", "mean_cost_gps", "mean_cost_gps_2"]


def test_compare_needs_two_runs(trained_run, tmp_path):
    assert main(["compare", str(trained_run),
                 "--out", str(tmp_path / "c.csv")]) == EXIT_CONFIG


def test_compare_rejects_mismatched_scenarios(trained_run, tmp_path):
    cfg = write_config(tmp_path / "t.yaml", scenario={"kind": "turn90"})
    other = tmp_path / "turn_run"
    assert main(["train", "--config", str(cfg), "--out", str(other)]) == EXIT_OK
    assert main(["compare", str(trained_run), str(other),
                 "--out", str(tmp_path / "c.csv")]) == EXIT_CONFIG


def test_export_traj_pd_default(tmp_path):
    out = tmp_path / "traj.csv"
    path_out = tmp_path / "path.csv"
    assert main(["export-traj", "--out", str(out),
                 "--path-out", str(path_out), "--deterministic"]) == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 50
    assert path_out.is_file()


def test_export_traj_rerun_identical(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert main(["export-traj", "--out", str(out), "--seed", "7"]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_export_traj_obstacle_out_requires_obstacle(tmp_path):
    assert main(["export-traj", "--out", str(tmp_path / "t.csv"),
                 "--obstacle-out", str(tmp_path / "o.csv")]) == EXIT_CONFIG


def test_export_traj_with_obstacle(tmp_path):
    out = tmp_path / "t.csv"
    obs = tmp_path / "o.csv"
    assert main(["export-traj", "--out", str(out), "--obstacle",
                 "--obstacle-out", str(obs), "--deterministic"]) == EXIT_OK
    assert len(read_csv(out)) == 50
    assert len(read_csv(obs)) > 0
