"""Closed-loop execution of the assignment and maintenance policies.

Each epoch the assignment policy decides first (on the bridged state), then
the maintenance policy. The plant then advances by the maintenance model's
successor distribution, after which coupling rules apply: tasks worked on by
an available machine complete, and the maintenance decision becomes the
next epoch's maintenance status.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import assignment as asg
from . import maintenance as mnt
from .mdp import Policy

PROB_TOL = 1e-9


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlantState:
    """Everything the closed loop tracks: maintenance state plus maintenance status."""

    e: tuple[int, ...]
    lam: tuple[int, ...]
    tau: tuple[int, ...]
    d_status: tuple[int, ...]

    @property
    def maintenance_state(self) -> mnt.MaintenanceState:
        return mnt.MaintenanceState(self.e, self.lam, self.tau)


@dataclass(frozen=True)
class Intervention:
    """Replace the plant state right after the decisions of epoch ``at_epoch``."""

    at_epoch: int
    override: PlantState

    def __post_init__(self):
        if self.at_epoch < 1:
            raise ValueError("intervention epoch must be >= 1")


@dataclass(frozen=True)
class TrajectoryConfig:
    initial: PlantState
    num_epochs: int = 7
    interventions: tuple[Intervention, ...] = ()
    seed: int | None = None  # None: maximum-likelihood stepping

    def __post_init__(self):
        if self.num_epochs < 1:
            raise ValueError("num_epochs must be >= 1")
        for iv in self.interventions:
            if iv.at_epoch > self.num_epochs:
                raise ValueError(f"intervention at epoch {iv.at_epoch} beyond horizon {self.num_epochs}")


@dataclass(frozen=True)
class CouplingRules:
    unavailable_intensities: tuple[int, ...] = (3,)
    complete_assigned_tasks: bool = True

    def available(self, d_status: Sequence[int]) -> list[bool]:
        return [d not in self.unavailable_intensities for d in d_status]


@dataclass(frozen=True)
class ClosedLoopModels:
    maintenance: mnt.MaintenanceConfig
    maintenance_chains: mnt.MaintenanceChains
    assignment: asg.AssignmentConfig
    tau_map: tuple[int, ...] = (0, 1, 2, 3)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    state: PlantState
    assignment_state: asg.AssignmentState
    assignment: tuple[int, ...]
    maintenance: tuple[int, ...]
    intervention: bool


@dataclass
class TrajectoryLog:
    records: list[EpochRecord] = field(default_factory=list)
    final: PlantState | None = None

    def __len__(self) -> int:
        return len(self.records)


def bridge_states(
    state: mnt.MaintenanceState,
    last_decision: Sequence[int],
    tau_map: Sequence[int],
) -> asg.AssignmentState:
    try:
        tau_bar = tuple(tau_map[t] for t in state.tau)
    except IndexError:
        raise ValueError(f"task code mapping undefined for some code in {state.tau}") from None
    return asg.AssignmentState(lam=tuple(state.lam), tau_bar=tau_bar, d_status=tuple(last_decision))


def max_likelihood_step(distribution: Sequence[tuple[int, float]]) -> int:
    """Most probable successor; ties go to the lowest state index."""
    if not distribution:
        raise ValueError("empty successor distribution")
    return min(distribution, key=lambda sp: (-sp[1], sp[0]))[0]


def sampled_step(distribution: Sequence[tuple[int, float]], rng: np.random.Generator) -> int:
    """Inverse-CDF draw over successors in ascending index order."""
    if not distribution:
        raise ValueError("empty successor distribution")
    items = sorted(distribution)
    probs = np.array([p for _, p in items])
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOL:
        raise ValueError("successor distribution is not a probability vector")
    cdf = np.cumsum(probs)
    pos = int(np.searchsorted(cdf, rng.random(), side="right"))
    return items[min(pos, len(items) - 1)][0]


def check_plant_state(state: PlantState, models: ClosedLoopModels) -> None:
    state.maintenance_state.check(models.maintenance)
    if len(state.d_status) != models.maintenance.n or not all(0 <= d <= 3 for d in state.d_status):
        raise ValueError(f"maintenance status must be {models.maintenance.n} codes in 0..3")


def apply_intervention(state: PlantState, intervention: Intervention, models: ClosedLoopModels) -> PlantState:
    check_plant_state(intervention.override, models)
    return intervention.override


def run_closed_loop(
    policy_assignment: Policy,
    policy_maintenance: Policy,
    models: ClosedLoopModels,
    coupling: CouplingRules,
    config: TrajectoryConfig,
) -> TrajectoryLog:
    mc, ac = models.maintenance, models.assignment
    m_decisions = mnt.enumerate_decisions(mc)
    a_decisions = asg.enumerate_assignments(ac.n, ac.m)
    if len(policy_maintenance) != mnt.state_count(mc) or len(policy_assignment) != asg.assignment_state_count(ac):
        raise SimulationError("policy sizes do not match the configured models")
    chains = models.maintenance_chains.resolved(mc)
    rng = np.random.default_rng(config.seed) if config.seed is not None else None
    interventions = {iv.at_epoch: iv for iv in config.interventions}

    state = config.initial
    check_plant_state(state, models)
    log = TrajectoryLog()
    for epoch in range(1, config.num_epochs + 1):
        a_state = bridge_states(state.maintenance_state, state.d_status, models.tau_map)
        a_idx = asg.encode_state(a_state, ac)
        m_idx = mnt.encode_state(state.maintenance_state, mc)
        try:
            a = a_decisions[policy_assignment[a_idx]]
            d = m_decisions[policy_maintenance[m_idx]]
        except IndexError:
            raise SimulationError(f"policy has no valid decision for epoch {epoch} state {state}") from None

        dist = mnt.successor_distribution(m_idx, d, mc, chains)
        nxt_idx = max_likelihood_step(dist) if rng is None else sampled_step(dist, rng)
        nxt = mnt.decode_state(nxt_idx, mc)

        tau = list(nxt.tau)
        if coupling.complete_assigned_tasks:
            for machine_ok, task in zip(coupling.available(state.d_status), a):
                if machine_ok and task and state.tau[task - 1] != 0:
                    tau[task - 1] = 0
        following = PlantState(nxt.e, nxt.lam, tuple(tau), tuple(d))

        iv = interventions.get(epoch)
        if iv is not None:
            following = apply_intervention(following, iv, models)
        log.records.append(EpochRecord(epoch, state, a_state, tuple(a), tuple(d), iv is not None))
        state = following
    log.final = state
    return log


def trajectory_columns(n: int, m: int) -> list[str]:
    cols = ["epoch"]
    cols += [f"e_{i}" for i in range(1, n + 1)]
    cols += [f"lambda_{i}" for i in range(1, n + 1)]
    cols += [f"tau_{j}" for j in range(1, m + 1)]
    cols += [f"dstatus_{i}" for i in range(1, n + 1)]
    cols += [f"a_{i}" for i in range(1, n + 1)]
    cols += [f"d_{i}" for i in range(1, n + 1)]
    return cols + ["intervention"]


def write_trajectory_csv(log: TrajectoryLog, path: str | Path, n: int, m: int) -> None:
    """One row per decision epoch, then a closing row holding the final state with blank decisions."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_columns(n, m))
        for r in log.records:
            s = r.state
            w.writerow([r.epoch, *s.e, *s.lam, *s.tau, *s.d_status, *r.assignment, *r.maintenance, int(r.intervention)])
        if log.final is not None:
            s = log.final
            w.writerow([len(log.records) + 1, *s.e, *s.lam, *s.tau, *s.d_status, *[""] * (2 * n), 0])


def read_trajectory_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
