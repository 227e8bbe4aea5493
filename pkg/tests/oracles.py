"""Independent reference computations for the tests.

Everything here works on plain dicts and dense numpy arrays and shares no
code with the package's solver paths.
"""

from __future__ import annotations

import itertools

import numpy as np


def random_mdp_dict(rng: np.random.Generator, max_states=4, max_decisions=3, max_discount=0.9):
    """Random finite MDP as (num_states, rewards, transitions, discount) dicts."""
    n = int(rng.integers(1, max_states + 1))
    rewards, transitions = {}, {}
    for s in range(n):
        k = int(rng.integers(1, max_decisions + 1))
        for d in range(k):
            rewards[(s, d)] = float(rng.uniform(0.05, 3.0))
            support = rng.random(n) < 0.7
            support[rng.integers(n)] = True
            w = np.where(support, rng.random(n) + 1e-3, 0.0)
            w /= w.sum()
            transitions[(s, d)] = [(j, float(w[j])) for j in range(n) if w[j] > 0]
    discount = float(rng.uniform(0.0, max_discount))
    return n, rewards, transitions, discount


def dense_policy_value(n, rewards, transitions, discount, policy):
    """Solve (I - gamma P_pi) v = r_pi directly."""
    p = np.zeros((n, n))
    r = np.zeros(n)
    for s in range(n):
        d = policy[s]
        r[s] = rewards[(s, d)]
        for j, prob in transitions[(s, d)]:
            p[s, j] += prob
    return np.linalg.solve(np.eye(n) - discount * p, r)


def all_policies(n, rewards):
    per_state = [sorted(d for (s, d) in rewards if s == st) for st in range(n)]
    return [list(choice) for choice in itertools.product(*per_state)]


def best_policy_values(n, rewards, transitions, discount):
    """Componentwise maximum of v_pi over every deterministic policy."""
    best = np.full(n, -np.inf)
    for pol in all_policies(n, rewards):
        best = np.maximum(best, dense_policy_value(n, rewards, transitions, discount, pol))
    return best


def brute_force_assignments(n, m):
    out = []
    for a in itertools.product(range(m + 1), repeat=n):
        nz = [x for x in a if x != 0]
        if len(nz) == len(set(nz)):
            out.append(a)
    return out


def joint_from_components(component_dists):
    """Joint distribution over tuples of independent component outcomes."""
    joint = {(): 1.0}
    for dist in component_dists:
        nxt = {}
        for prefix, p in joint.items():
            for value, q in dist.items():
                if q > 0:
                    nxt[prefix + (value,)] = nxt.get(prefix + (value,), 0.0) + p * q
        joint = nxt
    return joint
