"""Machine-to-task assignment MDP.

State: per-machine health ``lam`` (1..L+1), per-task detailed code
``tau_bar`` (0 inactive, 1..p ascending requirement), and per-machine
maintenance status ``d_status`` (last maintenance intensity). Decision:
``a[k]`` is the task (1..m) given to machine k, 0 leaves it idle; no two
machines share a task.

Decision ids index :func:`enumerate_assignments` (lexicographic). Each state
lists its decisions in preference order so that equal-value decisions
resolve toward covering active, high-code tasks with as many machines as
possible, then toward higher task indices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codec import MixedRadix, expand_successors, to_csr
from .maintenance import INTENSITIES, MaintenanceChains, MaintenanceConfig, check_chain, default_task_chain, health_tensor
from .mdp import MdpModel


@dataclass(frozen=True)
class AssignmentConfig:
    n: int = 2
    m: int = 3
    L: int = 5
    p: int = 3
    rho: tuple[float, ...] = (100.0, 0.5, 100.0, 2.0)
    eta1: int = 3

    def __post_init__(self):
        if min(self.n, self.L, self.p) < 1 or self.m < 0:
            raise ValueError("n, L, p must be >= 1 and m >= 0")
        if len(self.rho) != 4 or any(x <= 0 for x in self.rho):
            raise ValueError("rho must hold four positive constants")
        if not 1 <= self.eta1 <= self.L + 1:
            raise ValueError(f"eta1 must lie in 1..{self.L + 1}")

    @property
    def failure(self) -> int:
        return self.L + 1


@dataclass(frozen=True)
class AssignmentState:
    lam: tuple[int, ...]
    tau_bar: tuple[int, ...]
    d_status: tuple[int, ...]

    def check(self, config: AssignmentConfig) -> None:
        if (len(self.lam), len(self.tau_bar), len(self.d_status)) != (config.n, config.m, config.n):
            raise ValueError("assignment state dims do not match config")
        if not all(1 <= x <= config.failure for x in self.lam):
            raise ValueError(f"health code outside 1..{config.failure}: {self.lam}")
        if not all(0 <= x <= config.p for x in self.tau_bar):
            raise ValueError(f"task code outside 0..{config.p}: {self.tau_bar}")
        if not all(0 <= x < INTENSITIES for x in self.d_status):
            raise ValueError(f"maintenance status outside 0..3: {self.d_status}")


AssignmentDecision = tuple[int, ...]


@dataclass(frozen=True)
class AssignmentChains:
    health: np.ndarray  # (4, L+1, L+1): P(lam' | lam, d_status)
    tasks: np.ndarray  # (p+1, p+1)
    d_status: np.ndarray | None = None  # (4, 4), identity if None

    def resolved(self, config: AssignmentConfig) -> "AssignmentChains":
        size = config.L + 1
        health = np.asarray(self.health, float)
        if health.shape != (INTENSITIES, size, size):
            raise ValueError(f"health chain must have shape (4, {size}, {size})")
        for d in range(INTENSITIES):
            check_chain(f"health[d={d}]", health[d], size)
        tasks = np.asarray(self.tasks, float)
        check_chain("task", tasks, config.p + 1)
        ds = np.eye(INTENSITIES) if self.d_status is None else np.asarray(self.d_status, float)
        check_chain("maintenance-status", ds, INTENSITIES)
        return AssignmentChains(health, tasks, ds)


def marginal_health_chain(
    config: MaintenanceConfig,
    chains: MaintenanceChains,
    weights: Sequence[float] | None = None,
) -> np.ndarray:
    """P(lam' | lam, d) with the operating condition averaged out.

    ``weights`` is a distribution over operating conditions 1..M (uniform by default).
    """
    w = np.full(config.M, 1.0 / config.M) if weights is None else np.asarray(weights, float)
    if w.shape != (config.M,) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("operating-condition weights must be a distribution over 1..M")
    h = health_tensor(config, chains.resolved(config))
    return np.einsum("e,edij->dij", w, h)


def default_assignment_chains(
    maint_config: MaintenanceConfig,
    maint_chains: MaintenanceChains,
    p: int = 3,
    weights: Sequence[float] | None = None,
) -> AssignmentChains:
    return AssignmentChains(
        health=marginal_health_chain(maint_config, maint_chains, weights),
        tasks=default_task_chain(p + 1),
    )


def assignment_state_count(config: AssignmentConfig) -> int:
    return (config.L + 1) ** config.n * (config.p + 1) ** config.m * INTENSITIES ** config.n


def state_codec(config: AssignmentConfig) -> MixedRadix:
    n, m = config.n, config.m
    return MixedRadix((config.L + 1,) * n + (config.p + 1,) * m + (INTENSITIES,) * n)


def encode_state(state: AssignmentState, config: AssignmentConfig) -> int:
    state.check(config)
    return state_codec(config).encode([x - 1 for x in state.lam] + list(state.tau_bar) + list(state.d_status))


def decode_state(index: int, config: AssignmentConfig) -> AssignmentState:
    d = state_codec(config).decode(index)
    n, m = config.n, config.m
    return AssignmentState(
        lam=tuple(x + 1 for x in d[:n]),
        tau_bar=tuple(d[n : n + m]),
        d_status=tuple(d[n + m :]),
    )


def enumerate_assignments(n: int, m: int) -> list[AssignmentDecision]:
    """All vectors in {0..m}^n whose nonzero entries are distinct, lexicographic."""
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    out = []
    for a in itertools.product(range(m + 1), repeat=n):
        busy = [x for x in a if x]
        if len(busy) == len(set(busy)):
            out.append(a)
    return out


def assignment_count_formula(n: int, m: int) -> int:
    """Closed-form decision count m(m^(n-1) + n - 1) + 1.

    Agrees with :func:`enumerate_assignments` for n <= 3; it overcounts from
    n = 4 with m >= 2.
    """
    return m * (m ** (n - 1) + n - 1) + 1


def preference_key(decision: AssignmentDecision, tau_bar: Sequence[int]) -> tuple:
    """Sort key; smaller keys come first in a state's decision list."""
    covered = sorted((tau_bar[a - 1] for a in decision if a and tau_bar[a - 1] > 0), reverse=True)
    covered += [0] * (len(decision) - len(covered))
    idle = sum(1 for a in decision if a == 0)
    return tuple(-c for c in covered), idle, tuple(-a for a in decision)


def decision_order(tau_bar: Sequence[int], decisions: Sequence[AssignmentDecision]) -> list[int]:
    return sorted(range(len(decisions)), key=lambda i: preference_key(decisions[i], tau_bar))


def threshold(x: int, eta1: int) -> int:
    return 1 if x > eta1 else 0


def assignment_reward(state: AssignmentState, decision: AssignmentDecision, config: AssignmentConfig) -> float:
    rho1, rho2, rho3, rho4 = config.rho
    penalized = sum(threshold(lam, config.eta1) for lam, a in zip(state.lam, decision) if a != 0)
    return rho1 * math.exp(-rho2 * sum(state.tau_bar)) + rho3 * math.exp(-rho4 * penalized)


def assignment_transition(
    src: AssignmentState,
    decision: AssignmentDecision,
    dst: AssignmentState,
    config: AssignmentConfig,
    chains: AssignmentChains,
) -> float:
    """Product-form transition probability; the assignment itself does not enter."""
    chains = chains.resolved(config)
    p = 1.0
    for l0, l1, d in zip(src.lam, dst.lam, src.d_status):
        p *= chains.health[d, l0 - 1, l1 - 1]
    for t0, t1 in zip(src.tau_bar, dst.tau_bar):
        p *= chains.tasks[t0, t1]
    for d0, d1 in zip(src.d_status, dst.d_status):
        p *= chains.d_status[d0, d1]
    return float(p)


def _factors(config: AssignmentConfig, chains: AssignmentChains):
    n, m = config.n, config.m
    factors = []
    for k in range(n):
        factors.append(lambda s, a, k=k: chains.health[s[:, n + m + k], s[:, k]])
    for j in range(m):
        factors.append(lambda s, a, j=j: chains.tasks[s[:, n + j]])
    for k in range(n):
        factors.append(lambda s, a, k=k: chains.d_status[s[:, n + m + k]])
    return factors


def build_assignment_mdp(config: AssignmentConfig, chains: AssignmentChains, discount: float) -> MdpModel:
    chains = chains.resolved(config)
    n, m = config.n, config.m
    codec = state_codec(config)
    digits = codec.decode_all()
    decisions = enumerate_assignments(n, m)
    dec = np.array(decisions, dtype=np.int64)
    num_states, k = codec.size, len(decisions)

    rho1, rho2, rho3, rho4 = config.rho
    unhealthy = (digits[:, :n] + 1 > config.eta1).astype(np.int64)
    penalized = unhealthy @ (dec != 0).T.astype(np.int64)
    term1 = rho1 * np.exp(-rho2 * digits[:, n : n + m].sum(axis=1))
    rewards_by_id = term1[:, None] + rho3 * np.exp(-rho4 * penalized)

    task_codec = MixedRadix((config.p + 1,) * m)
    orders = np.array([decision_order(t, decisions) for t in itertools.product(range(config.p + 1), repeat=m)])
    task_index = (digits[:, n : n + m] * np.array(task_codec.strides, dtype=np.int64)).sum(axis=1)
    ids = orders[task_index]
    rewards = np.take_along_axis(rewards_by_id, ids, axis=1)

    # Successor rows do not depend on the decision: expand once per state, then repeat per slot.
    row, succ, prob = expand_successors(codec, digits, np.zeros((num_states, 1), np.int64), _factors(config, chains))
    counts = np.bincount(row, minlength=num_states)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    rep_counts = np.repeat(counts, k)
    rep_starts = np.repeat(starts, k)
    offsets = np.arange(rep_counts.sum()) - np.repeat(np.cumsum(rep_counts) - rep_counts, rep_counts)
    src = np.repeat(rep_starts, rep_counts) + offsets
    rows = np.repeat(np.arange(num_states * k, dtype=np.int64), rep_counts)
    transitions = to_csr(rows, succ[src], prob[src], num_states * k, num_states)
    return MdpModel(ids, rewards, transitions, float(discount))


def successor_distribution(state_index: int, config: AssignmentConfig, chains: AssignmentChains) -> list[tuple[int, float]]:
    chains = chains.resolved(config)
    codec = state_codec(config)
    s = np.array([codec.decode(state_index)], dtype=np.int64)
    _, succ, prob = expand_successors(codec, s, np.zeros((1, 1), np.int64), _factors(config, chains))
    return [(int(j), float(p)) for j, p in zip(succ, prob)]
