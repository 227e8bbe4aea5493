"""Finite discounted MDPs solved by synchronous value iteration.

A model stores, for every state, an ordered row of decision slots. Slot ``k``
of state ``s`` holds a decision id, its reward, and a sparse successor row at
``s * num_slots + k`` in the transition matrix. Ties in every argmax resolve
to the earliest slot; models that list decisions in ascending id order
therefore break ties toward the lowest decision id.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

ROW_SUM_TOL = 1e-9
DEFAULT_MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class MdpModel:
    """Immutable finite MDP.

    Attributes:
        decisions: (num_states, num_slots) decision ids, ``-1`` for unused slots.
        rewards: (num_states, num_slots) rewards, NaN for unused slots.
        transitions: CSR matrix of shape (num_states * num_slots, num_states).
        discount: Discount factor in [0, 1).
    """

    decisions: np.ndarray
    rewards: np.ndarray
    transitions: sparse.csr_matrix
    discount: float

    @property
    def num_states(self) -> int:
        return self.decisions.shape[0]

    @property
    def num_slots(self) -> int:
        return self.decisions.shape[1]

    def decisions_per_state(self, state: int) -> list[int]:
        row = self.decisions[state]
        return [int(d) for d in row if d >= 0]

    def slot_of(self, state: int, decision: int) -> int:
        hits = np.flatnonzero(self.decisions[state] == decision)
        if hits.size == 0:
            raise KeyError(f"decision {decision} not available in state {state}")
        return int(hits[0])

    def successors(self, state: int, decision: int) -> list[tuple[int, float]]:
        row = state * self.num_slots + self.slot_of(state, decision)
        lo, hi = self.transitions.indptr[row], self.transitions.indptr[row + 1]
        return [
            (int(j), float(p))
            for j, p in zip(self.transitions.indices[lo:hi], self.transitions.data[lo:hi])
        ]

    def reward(self, state: int, decision: int) -> float:
        return float(self.rewards[state, self.slot_of(state, decision)])

    @classmethod
    def from_dict(
        cls,
        num_states: int,
        rewards: Mapping[tuple[int, int], float],
        transitions: Mapping[tuple[int, int], Iterable[tuple[int, float]]],
        discount: float,
    ) -> "MdpModel":
        """Build a model from ``{(state, decision): ...}`` mappings.

        Decisions of each state are ordered by ascending id. Successor indices
        are not range-checked here so that :func:`validate_model` can report them.
        """
        per_state: dict[int, list[int]] = {s: [] for s in range(num_states)}
        for s, d in rewards:
            per_state.setdefault(s, []).append(d)
        num_slots = max([len(v) for v in per_state.values()] + [1])
        dec = np.full((num_states, num_slots), -1, dtype=np.int64)
        rew = np.full((num_states, num_slots), np.nan)
        rows, cols, probs = [], [], []
        max_col = num_states - 1
        for s in range(num_states):
            for k, d in enumerate(sorted(per_state.get(s, []))):
                dec[s, k] = d
                rew[s, k] = rewards[(s, d)]
                for j, p in sorted(transitions.get((s, d), ())):
                    rows.append(s * num_slots + k)
                    cols.append(j)
                    probs.append(p)
                    max_col = max(max_col, j)
        mat = sparse.csr_matrix(
            (probs, (rows, cols)), shape=(num_states * num_slots, max_col + 1)
        )
        mat.sum_duplicates()
        mat.sort_indices()
        return cls(dec, rew, mat, float(discount))


@dataclass(frozen=True)
class ValueFunction:
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Policy:
    decision: np.ndarray

    def __len__(self) -> int:
        return len(self.decision)

    def __getitem__(self, state: int) -> int:
        return int(self.decision[state])


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool


@dataclass(frozen=True)
class Violation:
    state: int | None
    decision: int | None
    check: str
    detail: str = ""

    def __str__(self) -> str:
        where = f"state={self.state} decision={self.decision}"
        return f"{self.check} at {where}: {self.detail}" if self.detail else f"{self.check} at {where}"


def validate_model(model: MdpModel) -> list[Violation]:
    """Return every invariant violation of ``model``; empty means well formed."""
    out: list[Violation] = []
    n, k = model.decisions.shape
    if not 0.0 <= model.discount < 1.0:
        out.append(Violation(None, None, "discount", f"{model.discount} not in [0, 1)"))
    if model.transitions.shape[0] != n * k:
        out.append(Violation(None, None, "shape", "transition rows != states * slots"))
        return out

    used = model.decisions >= 0
    for s in np.flatnonzero(~used.any(axis=1)):
        out.append(Violation(int(s), None, "no-decisions"))

    rew = np.where(used, model.rewards, 1.0)
    for s, slot in zip(*np.nonzero(~np.isfinite(rew) | (rew <= 0.0))):
        out.append(
            Violation(int(s), int(model.decisions[s, slot]), "reward-positivity",
                      f"R={model.rewards[s, slot]!r}")
        )

    mat = model.transitions.tocoo()
    bad = ~np.isfinite(mat.data) | (mat.data < 0.0)
    for r, p in zip(mat.row[bad], mat.data[bad]):
        s, slot = divmod(int(r), k)
        out.append(Violation(s, int(model.decisions[s, slot]), "probability-range", f"p={p!r}"))
    far = mat.col >= n
    for r, c in zip(mat.row[far], mat.col[far]):
        s, slot = divmod(int(r), k)
        out.append(Violation(s, int(model.decisions[s, slot]), "successor-range", f"successor {c}"))

    sums = np.asarray(model.transitions.sum(axis=1)).ravel().reshape(n, k)
    expected = used.astype(float)
    for s, slot in zip(*np.nonzero(np.abs(sums - expected) > ROW_SUM_TOL)):
        if used[s, slot]:
            out.append(Violation(int(s), int(model.decisions[s, slot]), "row-stochasticity",
                                 f"sum={sums[s, slot]!r}"))
        else:
            out.append(Violation(int(s), None, "unused-slot-has-successors"))
    return out


def _q_values(model: MdpModel, values: np.ndarray) -> np.ndarray:
    expected = model.transitions @ values
    q = model.rewards + model.discount * expected.reshape(model.decisions.shape)
    return np.where(model.decisions >= 0, q, -np.inf)


def bellman_backup(model: MdpModel, values: ValueFunction | np.ndarray, state: int) -> tuple[float, int]:
    """One-state Bellman optimality backup.

    Returns the maximal ``R(s, d) + discount * sum_s' T(s'|s, d) V(s')`` and the
    decision attaining it (earliest slot on ties). Successors are summed in
    ascending index order, which makes the result bit-identical to a sweep.
    """
    v = values.values if isinstance(values, ValueFunction) else np.asarray(values)
    if not 0 <= state < model.num_states:
        raise IndexError(f"state {state} out of range [0, {model.num_states})")
    if len(v) != model.num_states:
        raise ValueError("value function length does not match the model")
    mat = model.transitions
    best_value, best_decision = -np.inf, -1
    for slot, d in enumerate(model.decisions[state]):
        if d < 0:
            continue
        row = state * model.num_slots + slot
        acc = 0.0
        for idx in range(mat.indptr[row], mat.indptr[row + 1]):
            acc += mat.data[idx] * v[mat.indices[idx]]
        q = model.rewards[state, slot] + model.discount * acc
        if q > best_value:
            best_value, best_decision = float(q), int(d)
    return best_value, best_decision


def value_iteration(
    model: MdpModel,
    tolerance: float = 1e-6,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> tuple[ValueFunction, SolveReport]:
    """Synchronous value iteration from the all-zero value function.

    Stops once the sup-norm change between sweeps drops below ``tolerance``.
    ``callback(t, V_t)`` is invoked after every sweep, ``V_0`` included.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    v = np.zeros(model.num_states)
    if callback is not None:
        callback(0, v)
    residual = np.inf
    iterations = 0
    while iterations < max_iterations:
        v_next = _q_values(model, v).max(axis=1)
        iterations += 1
        if not np.all(np.isfinite(v_next)):
            raise FloatingPointError(f"non-finite value encountered at sweep {iterations}")
        residual = float(np.max(np.abs(v_next - v))) if len(v) else 0.0
        v = v_next
        if callback is not None:
            callback(iterations, v)
        if residual < tolerance:
            break
    return ValueFunction(v), SolveReport(iterations, residual, residual < tolerance)


def extract_policy(model: MdpModel, optimal_values: ValueFunction | np.ndarray) -> Policy:
    """Greedy policy with respect to ``optimal_values``."""
    v = optimal_values.values if isinstance(optimal_values, ValueFunction) else np.asarray(optimal_values)
    slots = np.argmax(_q_values(model, v), axis=1)
    return Policy(model.decisions[np.arange(model.num_states), slots].copy())


def _policy_rows(model: MdpModel, policy: Policy) -> np.ndarray:
    match = model.decisions == np.asarray(policy.decision)[:, None]
    if not np.all(match.any(axis=1)):
        bad = int(np.flatnonzero(~match.any(axis=1))[0])
        raise ValueError(f"policy decision {policy[bad]} invalid in state {bad}")
    slots = np.argmax(match, axis=1)
    return np.arange(model.num_states) * model.num_slots + slots


def evaluate_policy(
    model: MdpModel,
    policy: Policy,
    tolerance: float = 1e-6,
    max_iterations: int = 100 * DEFAULT_MAX_ITERATIONS,
) -> ValueFunction:
    """Fixed point of the policy-restricted Bellman operator by iteration.

    Iterates until the sweep change is below ``tolerance * (1 - discount) / discount``
    so the returned values are within ``tolerance`` of the exact fixed point.
    """
    rows = _policy_rows(model, policy)
    p_pi = model.transitions[rows][:, : model.num_states]
    r_pi = model.rewards.reshape(-1)[rows]
    gamma = model.discount
    stop = tolerance if gamma == 0 else tolerance * (1.0 - gamma) / gamma
    v = np.zeros(model.num_states)
    for _ in range(max_iterations):
        v_next = r_pi + gamma * (p_pi @ v)
        done = np.max(np.abs(v_next - v)) < stop
        v = v_next
        if done:
            break
    return ValueFunction(v)


def _header(num_states: int, discount: float, tolerance: float) -> str:
    return f"# num_states={num_states},discount={discount!r},tolerance={tolerance!r}\n"


def _read_header(lines: Sequence[str]) -> dict[str, str]:
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing '# num_states=...' header line")
    return dict(item.split("=", 1) for item in lines[0][1:].strip().split(","))


def write_values_csv(path: str | Path, values: ValueFunction, discount: float, tolerance: float) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_header(len(values), discount, tolerance))
        fh.write("state_index,value\n")
        for i, x in enumerate(values.values):
            fh.write(f"{i},{float(x)!r}\n")


def write_policy_csv(path: str | Path, policy: Policy, discount: float, tolerance: float) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_header(len(policy), discount, tolerance))
        fh.write("state_index,decision_index\n")
        for i, d in enumerate(policy.decision):
            fh.write(f"{i},{int(d)}\n")


def _read_table(path: str | Path, column: str, cast) -> tuple[dict[str, str], list]:
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    meta = _read_header(lines)
    reader = csv.DictReader(lines[1:])
    if reader.fieldnames != ["state_index", column]:
        raise ValueError(f"{path}: expected columns state_index,{column}")
    out = []
    for expected, row in enumerate(reader):
        if int(row["state_index"]) != expected:
            raise ValueError(f"{path}: state indices must be 0..N-1 in order")
        out.append(cast(row[column]))
    if "num_states" in meta and int(meta["num_states"]) != len(out):
        raise ValueError(f"{path}: header says {meta['num_states']} states, found {len(out)}")
    return meta, out


def read_values_csv(path: str | Path) -> tuple[ValueFunction, dict[str, str]]:
    meta, vals = _read_table(path, "value", float)
    return ValueFunction(np.array(vals, dtype=float)), meta


def read_policy_csv(path: str | Path) -> tuple[Policy, dict[str, str]]:
    meta, decs = _read_table(path, "decision_index", int)
    return Policy(np.array(decs, dtype=np.int64)), meta
