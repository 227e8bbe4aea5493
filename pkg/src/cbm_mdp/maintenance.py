"""Machine-health maintenance MDP.

State: per-machine operating condition ``e`` (1..M) and health ``lam``
(1..L, with L+1 standing for failure), plus per-task flags ``tau``
(0 inactive, 1..3 priority). Decision: per-machine maintenance intensity
(0 none, 1 non-intrusive, 2 partially intrusive, 3 fully intrusive).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .codec import MixedRadix, expand_successors, to_csr
from .degradation import DEFAULT_DEGRADATION, DegradationTable
from .mdp import MdpModel

INTENSITIES = 4


@dataclass(frozen=True)
class MaintenanceConfig:
    n: int = 2
    m: int = 3
    M: int = 4
    L: int = 5
    r: tuple[float, ...] = (7.0, 0.5, 10.0, 5.0, 5.0, 0.25)
    epoch_seconds: float = 10.0
    task_levels: int = 4  # size of the task-flag alphabet {0..task_levels-1}

    def __post_init__(self):
        if min(self.n, self.M, self.L) < 1 or self.m < 0:
            raise ValueError("n, M, L must be >= 1 and m >= 0")
        if len(self.r) != 6 or any(x <= 0 for x in self.r):
            raise ValueError("r must hold six positive constants")
        if self.task_levels < 2:
            raise ValueError("task alphabet needs at least {0, 1}")
        if self.epoch_seconds <= 0:
            raise ValueError("epoch_seconds must be positive")

    @property
    def failure(self) -> int:
        return self.L + 1


@dataclass(frozen=True)
class MaintenanceState:
    e: tuple[int, ...]
    lam: tuple[int, ...]
    tau: tuple[int, ...]

    def check(self, config: MaintenanceConfig) -> None:
        if (len(self.e), len(self.lam), len(self.tau)) != (config.n, config.n, config.m):
            raise ValueError(f"state dims {len(self.e)}/{len(self.lam)}/{len(self.tau)} do not match config")
        if not all(1 <= x <= config.M for x in self.e):
            raise ValueError(f"operating condition outside 1..{config.M}: {self.e}")
        if not all(1 <= x <= config.failure for x in self.lam):
            raise ValueError(f"health code outside 1..{config.failure}: {self.lam}")
        if not all(0 <= x < config.task_levels for x in self.tau):
            raise ValueError(f"task flag outside 0..{config.task_levels - 1}: {self.tau}")


MaintenanceDecision = tuple[int, ...]


@dataclass(frozen=True)
class MaintenanceEffect:
    """How each intensity acts on health during one epoch."""

    suppress_factor_nonintrusive: float = 0.5
    improve_prob_partial: float = 0.8
    reset_prob_full: float = 1.0

    def __post_init__(self):
        for name in ("suppress_factor_nonintrusive", "improve_prob_partial", "reset_prob_full"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def default_task_chain(levels: int = 4, complete_prob: float = 0.2) -> np.ndarray:
    """Active tasks complete with ``complete_prob`` per epoch; inactive ones stay inactive."""
    chain = np.eye(levels)
    for k in range(1, levels):
        chain[k, k] = 1.0 - complete_prob
        chain[k, 0] = complete_prob
    return chain


def check_chain(name: str, chain: np.ndarray, size: int) -> None:
    if chain.shape != (size, size):
        raise ValueError(f"{name} chain must be {size}x{size}, got {chain.shape}")
    if np.any(chain < 0) or not np.allclose(chain.sum(axis=1), 1.0, atol=1e-9, rtol=0):
        raise ValueError(f"{name} chain must be row-stochastic")


@dataclass(frozen=True)
class MaintenanceChains:
    degradation: DegradationTable = DEFAULT_DEGRADATION
    effect: MaintenanceEffect = field(default_factory=MaintenanceEffect)
    op_condition: np.ndarray | None = None  # M x M, identity if None
    tasks: np.ndarray | None = None  # task_levels x task_levels

    def resolved(self, config: MaintenanceConfig) -> "MaintenanceChains":
        op = np.eye(config.M) if self.op_condition is None else np.asarray(self.op_condition, float)
        tasks = default_task_chain(config.task_levels) if self.tasks is None else np.asarray(self.tasks, float)
        check_chain("operating-condition", op, config.M)
        check_chain("task", tasks, config.task_levels)
        missing = self.degradation.missing(config.M)
        if missing:
            raise KeyError(f"degradation table lacks entries {missing}")
        return MaintenanceChains(self.degradation, self.effect, op, tasks)


def state_count(config: MaintenanceConfig) -> int:
    return config.M ** config.n * (config.L + 1) ** config.n * config.task_levels ** config.m


def state_codec(config: MaintenanceConfig) -> MixedRadix:
    n, m = config.n, config.m
    return MixedRadix((config.M,) * n + (config.L + 1,) * n + (config.task_levels,) * m)


def decision_codec(config: MaintenanceConfig) -> MixedRadix:
    return MixedRadix((INTENSITIES,) * config.n)


def encode_state(state: MaintenanceState, config: MaintenanceConfig) -> int:
    state.check(config)
    digits = [x - 1 for x in state.e] + [x - 1 for x in state.lam] + list(state.tau)
    return state_codec(config).encode(digits)


def decode_state(index: int, config: MaintenanceConfig) -> MaintenanceState:
    d = state_codec(config).decode(index)
    n = config.n
    return MaintenanceState(
        e=tuple(x + 1 for x in d[:n]),
        lam=tuple(x + 1 for x in d[n : 2 * n]),
        tau=tuple(d[2 * n :]),
    )


def enumerate_decisions(config: MaintenanceConfig) -> list[MaintenanceDecision]:
    return list(itertools.product(range(INTENSITIES), repeat=config.n))


def maintenance_reward(state: MaintenanceState, decision: MaintenanceDecision, config: MaintenanceConfig) -> float:
    r1, r2, r3, r4, r5, r6 = config.r
    idle = sum(1 for d in decision if d == 0)
    active = sum(1 for t in state.tau if t != 0)
    return (
        r1 * sum(state.e) * math.exp(-r2 * sum(state.lam))
        + r3 * math.exp(-r4 * sum(decision))
        + r5 * math.exp(r6 * (idle - active))
    )


def health_transition(
    lam: int,
    e: int,
    d: int,
    table: DegradationTable,
    effect: MaintenanceEffect,
    L: int,
) -> dict[int, float]:
    """Distribution of next health code for one machine.

    Degradation moves at most one level per epoch; failure (L+1) is absorbing
    unless partial (2) or full (3) maintenance is applied.
    """
    failed = L + 1
    if not 1 <= lam <= failed:
        raise ValueError(f"health code {lam} outside 1..{failed}")
    if d not in range(INTENSITIES):
        raise ValueError(f"maintenance intensity {d} outside 0..3")
    out: dict[int, float] = {}

    def add(code: int, p: float) -> None:
        if p > 0.0:
            out[code] = out.get(code, 0.0) + p

    if d in (0, 1):
        if lam == failed:
            return {failed: 1.0}
        p = table.lookup(e, lam)
        if d == 1:
            p *= effect.suppress_factor_nonintrusive
        add(lam + 1, p)
        add(lam, 1.0 - p)
    elif d == 2:
        q = effect.improve_prob_partial if lam > 1 else 0.0
        add(lam - 1, q)
        add(lam, 1.0 - q)
    else:
        q = effect.reset_prob_full if lam > 1 else 0.0
        add(1, q)
        add(lam, 1.0 - q)
    return out


def health_tensor(config: MaintenanceConfig, chains: MaintenanceChains) -> np.ndarray:
    """H[e-1, d, lam-1, lam'-1] = P(lam' | lam, e, d)."""
    size = config.L + 1
    h = np.zeros((config.M, INTENSITIES, size, size))
    for e in range(1, config.M + 1):
        for d in range(INTENSITIES):
            for lam in range(1, size + 1):
                for nxt, p in health_transition(lam, e, d, chains.degradation, chains.effect, config.L).items():
                    h[e - 1, d, lam - 1, nxt - 1] = p
    return h


def maintenance_transition(
    src: MaintenanceState,
    decision: MaintenanceDecision,
    dst: MaintenanceState,
    config: MaintenanceConfig,
    chains: MaintenanceChains,
) -> float:
    """Product-form transition probability, one factor per state variable."""
    chains = chains.resolved(config)
    p = 1.0
    for e0, e1 in zip(src.e, dst.e):
        p *= chains.op_condition[e0 - 1, e1 - 1]
    for e0, l0, l1, d in zip(src.e, src.lam, dst.lam, decision):
        p *= health_transition(l0, e0, d, chains.degradation, chains.effect, config.L).get(l1, 0.0)
    for t0, t1 in zip(src.tau, dst.tau):
        p *= chains.tasks[t0, t1]
    return float(p)


def _factors(config: MaintenanceConfig, chains: MaintenanceChains):
    n, m = config.n, config.m
    h = health_tensor(config, chains)
    factors = []
    for k in range(n):
        factors.append(lambda s, d, k=k: chains.op_condition[s[:, k]])
    for k in range(n):
        factors.append(lambda s, d, k=k: h[s[:, k], d[:, k], s[:, n + k]])
    for j in range(m):
        factors.append(lambda s, d, j=j: chains.tasks[s[:, 2 * n + j]])
    return factors


def successor_distribution(
    state_index: int,
    decision: MaintenanceDecision,
    config: MaintenanceConfig,
    chains: MaintenanceChains,
) -> list[tuple[int, float]]:
    chains = chains.resolved(config)
    codec = state_codec(config)
    s = np.array([codec.decode(state_index)], dtype=np.int64)
    d = np.array([decision], dtype=np.int64)
    _, succ, prob = expand_successors(codec, s, d, _factors(config, chains))
    return [(int(j), float(p)) for j, p in zip(succ, prob)]


def reward_matrix(config: MaintenanceConfig, digits: np.ndarray, decisions: np.ndarray) -> np.ndarray:
    """Rewards for every (state, decision id); vectorized twin of :func:`maintenance_reward`."""
    r1, r2, r3, r4, r5, r6 = config.r
    n = config.n
    sum_e = (digits[:, :n] + 1).sum(axis=1)
    sum_lam = (digits[:, n : 2 * n] + 1).sum(axis=1)
    active = (digits[:, 2 * n :] != 0).sum(axis=1)
    sum_d = decisions.sum(axis=1)
    idle = (decisions == 0).sum(axis=1)
    return (
        (r1 * sum_e * np.exp(-r2 * sum_lam))[:, None]
        + (r3 * np.exp(-r4 * sum_d))[None, :]
        + r5 * np.exp(r6 * (idle[None, :] - active[:, None]))
    )


def build_maintenance_mdp(config: MaintenanceConfig, chains: MaintenanceChains, discount: float) -> MdpModel:
    chains = chains.resolved(config)
    codec = state_codec(config)
    digits = codec.decode_all()
    decisions = np.array(enumerate_decisions(config), dtype=np.int64)
    num_states, k = codec.size, len(decisions)
    rewards = reward_matrix(config, digits, decisions)

    row_state = np.repeat(digits, k, axis=0)
    row_decision = np.tile(decisions, (num_states, 1))
    row, succ, prob = expand_successors(codec, row_state, row_decision, _factors(config, chains))
    transitions = to_csr(row, succ, prob, num_states * k, num_states)
    ids = np.tile(np.arange(k, dtype=np.int64), (num_states, 1))
    return MdpModel(ids, rewards, transitions, float(discount))
