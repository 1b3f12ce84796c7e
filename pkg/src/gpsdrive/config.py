"""YAML run configuration with strict schema validation.

A run config fully determines a training run: algorithm, scenario, cost
weights, algorithm hyperparameters, seed, and output directory.  Unknown
keys anywhere in the document are rejected so typos fail loudly instead
of silently falling back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import yaml

from .cem import CemConfig
from .costs import CostParams
from .dgd import DualState
from .env import ObstacleSpec, ScenarioSpec
from .gps import GpsConfig, PdGains
from .track import PATH_KINDS

ALGORITHMS = ("gps", "cem")


class ConfigError(ValueError):
    """Raised for any schema violation; message names the offending field."""


@dataclass
class RunConfig:
    algorithm: str
    seed: int
    output_dir: Path
    scenario: ScenarioSpec
    cost: CostParams
    gps: GpsConfig
    cem: CemConfig
    mixed: bool = False


def _require(mapping: dict, key: str, where: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"missing required field: {where}{key}")
    return mapping[key]

def _check_keys(mapping: dict, allowed: set[str], where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown field: {where}{sorted(unknown)[0]}")

def _pop_typed(mapping: dict, key: str, kind, default, where: str):
    value = mapping.get(key, default)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"field {where}{key} must be {getattr(kind, '__name__', kind)}")
    return value


def _build_obstacle(raw: Optional[dict], where: str) -> Optional[ObstacleSpec]:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError(f"field {where} must be a mapping or null")
    _check_keys(raw, {"gap", "speed", "lane_index"}, where + ".")
    return ObstacleSpec(
        gap=_pop_typed(raw, "gap", float, 15.0, where + "."),
        speed=_pop_typed(raw, "speed", float, 2.0, where + "."),
        lane_index=_pop_typed(raw, "lane_index", int, 0, where + "."),
    )


def _build_scenario(raw: dict) -> ScenarioSpec:
    _check_keys(raw, {"kind", "v_ref", "horizon", "dt", "obstacle"}, "scenario.")
    kind = _require(raw, "kind", "scenario.")
    if kind not in PATH_KINDS:
        raise ConfigError(f"field scenario.kind must be one of {sorted(PATH_KINDS)}")
    try:
        return ScenarioSpec(
            kind=kind,
            v_ref=_pop_typed(raw, "v_ref", float, 5.0, "scenario."),
            horizon=_pop_typed(raw, "horizon", int, 50, "scenario."),
            dt=_pop_typed(raw, "dt", float, 0.1, "scenario."),
            obstacle=_build_obstacle(raw.get("obstacle"), "scenario.obstacle"),
        )
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def _build_dataclass(cls, raw: dict, where: str, overrides: dict):
    """Fill a flat dataclass from a mapping, rejecting unknown keys."""
    spec = {f.name: f for f in fields(cls)}
    allowed = set(spec) - set(overrides)
    _check_keys(raw, allowed, where)
    kwargs = dict(overrides)
    defaults = cls()
    for name in allowed:
        current = getattr(defaults, name)
        kind = float if isinstance(current, float) else int if isinstance(current, int) else None
        kwargs[name] = _pop_typed(raw, name, kind, current, where)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where[:-1]}: {exc}") from exc


def _build_gps(raw: dict, scenario: ScenarioSpec, cost: CostParams, seed: int) -> GpsConfig:
    _check_keys(raw, {
        "iterations", "trajectories_per_iteration", "gmm_components",
        "em_iterations", "em_tol", "buffer_capacity", "prior_strength",
        "epsilon", "pd",
    }, "gps.")
    prior = raw.get("prior_strength", [20.0, 50.0])
    if not (isinstance(prior, (list, tuple)) and len(prior) == 2):
        raise ConfigError("field gps.prior_strength must be a pair [m, n0]")
    pd = _build_dataclass(PdGains, raw.get("pd", {}), "gps.pd.", {})
    epsilon = _pop_typed(raw, "epsilon", float, 1.0, "gps.")
    try:
        dual = DualState(epsilon=epsilon)
        return GpsConfig(
            scenario=scenario,
            cost=cost,
            iterations=_pop_typed(raw, "iterations", int, 10, "gps."),
            trajectories_per_iteration=_pop_typed(
                raw, "trajectories_per_iteration", int, 4, "gps."),
            gmm_components=_pop_typed(raw, "gmm_components", int, 20, "gps."),
            em_iterations=_pop_typed(raw, "em_iterations", int, 10, "gps."),
            em_tol=_pop_typed(raw, "em_tol", float, 1e-6, "gps."),
            buffer_capacity=_pop_typed(raw, "buffer_capacity", int, 5000, "gps."),
            prior_strength=(float(prior[0]), float(prior[1])),
            dual=dual,
            pd=pd,
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"gps: {exc}") from exc


def _build_cem(raw: dict, scenario: ScenarioSpec, cost: CostParams, seed: int) -> CemConfig:
    pd = _build_dataclass(PdGains, raw.pop("pd", {}) if "pd" in raw else {}, "cem.pd.", {})
    cfg = _build_dataclass(
        CemConfig, raw, "cem.",
        {"scenario": scenario, "cost": cost, "seed": seed, "pd": pd},
    )
    return cfg


def parse_config(raw: dict, default_output: Optional[str] = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys(raw, {
        "algorithm", "seed", "output_dir", "scenario", "cost", "gps", "cem", "mixed",
    }, "")
    algorithm = _require(raw, "algorithm", "")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"field algorithm must be one of {ALGORITHMS}")
    seed = _pop_typed(raw, "seed", int, None, "") if "seed" in raw else None
    if seed is None:
        raise ConfigError("missing required field: seed")
    output_dir = raw.get("output_dir", default_output)
    if output_dir is None:
        raise ConfigError("missing required field: output_dir")

    scenario_raw = _require(raw, "scenario", "")
    if not isinstance(scenario_raw, dict):
        raise ConfigError("field scenario must be a mapping")
    scenario = _build_scenario(scenario_raw)

    cost_raw = raw.get("cost", {})
    if not isinstance(cost_raw, dict):
        raise ConfigError("field cost must be a mapping")
    cost = _build_dataclass(CostParams, cost_raw, "cost.", {"v_ref": scenario.v_ref})
    try:
        cost.validate()
    except ValueError as exc:
        raise ConfigError(f"cost: {exc}") from exc

    gps_raw = raw.get("gps", {})
    cem_raw = raw.get("cem", {})
    for name, section in (("gps", gps_raw), ("cem", cem_raw)):
        if not isinstance(section, dict):
            raise ConfigError(f"field {name} must be a mapping")
    mixed = _pop_typed(raw, "mixed", bool, False, "")
    if mixed and scenario.obstacle is not None:
        raise ConfigError("mixed mode does not support obstacle scenarios")
    return RunConfig(
        algorithm=algorithm,
        seed=seed,
        output_dir=Path(output_dir),
        scenario=scenario,
        cost=cost,
        gps=_build_gps(dict(gps_raw), scenario, cost, seed),
        cem=_build_cem(dict(cem_raw), scenario, cost, seed),
        mixed=mixed,
    )


def load_config(path: str | Path, default_output: Optional[str] = None) -> RunConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse config: {exc}") from exc
    return parse_config(raw, default_output=default_output)


def resolved_dict(config: RunConfig) -> dict:
    """Fully materialized config with every default spelled out."""
    scenario = {
        "kind": config.scenario.kind,
        "v_ref": config.scenario.v_ref,
        "horizon": config.scenario.horizon,
        "dt": config.scenario.dt,
        "obstacle": None if config.scenario.obstacle is None else {
            "gap": config.scenario.obstacle.gap,
            "speed": config.scenario.obstacle.speed,
            "lane_index": config.scenario.obstacle.lane_index,
        },
    }
    # v_ref mirrors scenario.v_ref and is not an accepted cost key
    cost = {
        f.name: getattr(config.cost, f.name)
        for f in fields(CostParams)
        if f.name != "v_ref"
    }
    pd = {f.name: getattr(config.gps.pd, f.name) for f in fields(PdGains)}
    gps = {
        "iterations": config.gps.iterations,
        "trajectories_per_iteration": config.gps.trajectories_per_iteration,
        "gmm_components": config.gps.gmm_components,
        "em_iterations": config.gps.em_iterations,
        "em_tol": config.gps.em_tol,
        "buffer_capacity": config.gps.buffer_capacity,
        "prior_strength": list(config.gps.prior_strength),
        "epsilon": config.gps.dual.epsilon,
        "pd": pd,
    }
    cem = {
        "iterations": config.cem.iterations,
        "population": config.cem.population,
        "elite_count": config.cem.elite_count,
        "smoothing": config.cem.smoothing,
        "sigma_init": config.cem.sigma_init,
    }
    return {
        "algorithm": config.algorithm,
        "seed": config.seed,
        "output_dir": str(config.output_dir),
        "mixed": config.mixed,
        "scenario": scenario,
        "cost": cost,
        "gps": gps,
        "cem": cem,
    }


def write_resolved_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(resolved_dict(config), sort_keys=False, default_flow_style=False)
    )
