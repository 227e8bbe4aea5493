"""Run configuration: one YAML file, merged over the shipped defaults."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import yaml

from .assignment import AssignmentChains, AssignmentConfig, marginal_health_chain
from .degradation import DegradationTable, HealthMap, TaylorLifeParams, read_table_csv
from .maintenance import MaintenanceChains, MaintenanceConfig, MaintenanceEffect
from .simulator import (
    ClosedLoopModels,
    CouplingRules,
    Intervention,
    PlantState,
    TrajectoryConfig,
    check_plant_state,
)


class ConfigError(ValueError):
    pass


TRAJECTORY_KEYS = {"epochs", "initial", "interventions"}
PLANT_KEYS = {"e", "lam", "dstatus", "tau"}
INTERVENTION_KEYS = {"at_epoch", "state"}


def default_config_text() -> str:
    return resources.files("cbm_mdp").joinpath("data/default.yaml").read_text()


def default_wear_fixture() -> Path:
    return Path(str(resources.files("cbm_mdp").joinpath("data/mill_wear_synthetic.csv")))


def _check_keys(user: Any, ref: Any, path: str) -> None:
    if not isinstance(user, dict) or not isinstance(ref, dict):
        return
    for key, value in user.items():
        where = f"{path}.{key}" if path else str(key)
        if path == "trajectories":
            _check_trajectory(value, where)
        elif key not in ref:
            raise ConfigError(f"unknown config key '{where}'")
        else:
            _check_keys(value, ref[key], where)


def _check_plant(block: Any, where: str) -> None:
    if not isinstance(block, dict) or set(block) != PLANT_KEYS:
        raise ConfigError(f"'{where}' needs exactly the keys {sorted(PLANT_KEYS)}")


def _check_trajectory(block: Any, where: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"'{where}' must be a mapping")
    unknown = set(block) - TRAJECTORY_KEYS
    if unknown:
        raise ConfigError(f"unknown config key '{where}.{sorted(unknown)[0]}'")
    _check_plant(block.get("initial"), f"{where}.initial")
    for i, iv in enumerate(block.get("interventions") or []):
        if not isinstance(iv, dict) or set(iv) != INTERVENTION_KEYS:
            raise ConfigError(f"'{where}.interventions[{i}]' needs keys {sorted(INTERVENTION_KEYS)}")
        _check_plant(iv["state"], f"{where}.interventions[{i}].state")


def _merge(base: dict, user: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in user.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_override(raw: dict, assignment: str) -> None:
    """Apply one ``dotted.key=value`` override in place; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' is not of the form key=value")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = raw
    for i, part in enumerate(parts[:-1]):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"unknown config key '{'.'.join(parts[: i + 1])}'")
        node = node[part]
    if not isinstance(node, dict) or (parts[-1] not in node and parts[0] != "trajectories"):
        raise ConfigError(f"unknown config key '{key}'")
    node[parts[-1]] = yaml.safe_load(text)


def _plant(block: dict) -> PlantState:
    return PlantState(
        e=tuple(int(x) for x in block["e"]),
        lam=tuple(int(x) for x in block["lam"]),
        tau=tuple(int(x) for x in block["tau"]),
        d_status=tuple(int(x) for x in block["dstatus"]),
    )


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    base_dir: Path
    maintenance: MaintenanceConfig
    maintenance_chains: MaintenanceChains
    assignment: AssignmentConfig
    op_condition_weights: tuple[float, ...]
    tau_map: tuple[int, ...]
    discount: float
    tolerance: float
    max_iterations: int
    healthmap: HealthMap
    taylor: TaylorLifeParams
    full_wear_mm: float
    rounding: int
    coupling: CouplingRules
    trajectories: dict[str, TrajectoryConfig]
    output_dir: Path

    @property
    def digest(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def assignment_chains(self) -> AssignmentChains:
        a = self.raw["assignment"]
        return AssignmentChains(
            health=marginal_health_chain(self.maintenance, self.maintenance_chains, self.op_condition_weights),
            tasks=np.asarray(a["task_chain"], float),
            d_status=np.asarray(a["dstatus_chain"], float),
        )

    def closed_loop_models(self) -> ClosedLoopModels:
        return ClosedLoopModels(self.maintenance, self.maintenance_chains, self.assignment, self.tau_map)


def _build(raw: dict, base_dir: Path) -> RunConfig:
    mdl, sol, mnt, asg, deg = (raw[k] for k in ("model", "solver", "maintenance", "assignment", "degradation"))
    mconf = MaintenanceConfig(
        n=int(mdl["n"]), m=int(mdl["m"]), M=int(mdl["M"]), L=int(mdl["L"]),
        r=tuple(float(x) for x in mnt["r"]),
        epoch_seconds=float(deg["epoch_seconds"]),
        task_levels=int(mdl["task_levels"]),
    )
    if deg.get("table_csv"):
        table = read_table_csv(base_dir / deg["table_csv"])
    else:
        table = DegradationTable.from_columns(deg["table"]["new"], deg["table"]["old"])
    chains = MaintenanceChains(
        degradation=table,
        effect=MaintenanceEffect(**mnt["effect"]),
        op_condition=np.asarray(mnt["op_condition_chain"], float),
        tasks=np.asarray(mnt["task_chain"], float),
    ).resolved(mconf)
    aconf = AssignmentConfig(
        n=mconf.n, m=mconf.m, L=mconf.L, p=int(mdl["p"]),
        rho=tuple(float(x) for x in asg["rho"]), eta1=int(asg["eta1"]),
    )
    tau_map = tuple(int(x) for x in asg["tau_map"])
    if len(tau_map) != mconf.task_levels or not all(0 <= x <= aconf.p for x in tau_map):
        raise ConfigError(f"tau_map needs {mconf.task_levels} entries in 0..{aconf.p}")
    discount = float(sol["discount"])
    if not 0.0 <= discount < 1.0:
        raise ConfigError("solver.discount must lie in [0, 1)")
    if float(sol["tolerance"]) <= 0:
        raise ConfigError("solver.tolerance must be positive")

    models = ClosedLoopModels(mconf, chains, aconf, tau_map)
    trajectories = {}
    for name, block in (raw.get("trajectories") or {}).items():
        ivs = tuple(Intervention(int(iv["at_epoch"]), _plant(iv["state"])) for iv in block.get("interventions") or [])
        tc = TrajectoryConfig(_plant(block["initial"]), int(block.get("epochs", 7)), ivs)
        check_plant_state(tc.initial, models)
        for iv in ivs:
            check_plant_state(iv.override, models)
        trajectories[name] = tc

    cpl = raw["coupling"]
    rc = RunConfig(
        raw=raw,
        base_dir=base_dir,
        maintenance=mconf,
        maintenance_chains=chains,
        assignment=aconf,
        op_condition_weights=tuple(float(x) for x in asg["op_condition_weights"]),
        tau_map=tau_map,
        discount=discount,
        tolerance=float(sol["tolerance"]),
        max_iterations=int(sol["max_iterations"]),
        healthmap=HealthMap(tuple(float(x) for x in deg["health_thresholds"])),
        taylor=TaylorLifeParams(float(deg["taylor"]["C"]), float(deg["taylor"]["exponent"])),
        full_wear_mm=float(deg["full_wear_mm"]),
        rounding=int(deg["rounding"]),
        coupling=CouplingRules(tuple(int(x) for x in cpl["unavailable_intensities"]), bool(cpl["complete_assigned_tasks"])),
        trajectories=trajectories,
        output_dir=Path(raw["output_dir"]),
    )
    if rc.healthmap.levels != mconf.L:
        raise ConfigError(f"health_thresholds must list L={mconf.L} thresholds")
    rc.assignment_chains().resolved(aconf)
    return rc


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Load ``path`` (or the shipped defaults), apply ``key=value`` overrides, validate."""
    defaults = yaml.safe_load(default_config_text())
    if path is None:
        raw, base_dir = copy.deepcopy(defaults), Path.cwd()
    else:
        path = Path(path)
        try:
            user = yaml.safe_load(path.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _check_keys(user, defaults, "")
        raw, base_dir = _merge(defaults, user), path.parent
        if "trajectories" in user:
            raw["trajectories"] = user["trajectories"]
    for item in overrides:
        apply_override(raw, item)
    _check_keys(raw, defaults, "")
    try:
        return _build(raw, base_dir)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from exc
