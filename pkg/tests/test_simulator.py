from collections import Counter

import numpy as np
import pytest

from cbm_mdp import assignment as asg
from cbm_mdp import maintenance as mnt
from cbm_mdp.maintenance import MaintenanceChains, MaintenanceConfig, MaintenanceState
from cbm_mdp.mdp import Policy
from cbm_mdp.simulator import (
    ClosedLoopModels,
    CouplingRules,
    Intervention,
    PlantState,
    SimulationError,
    TrajectoryConfig,
    apply_intervention,
    bridge_states,
    max_likelihood_step,
    read_trajectory_csv,
    run_closed_loop,
    sampled_step,
    write_trajectory_csv,
)

MODELS = ClosedLoopModels(MaintenanceConfig(), MaintenanceChains(), asg.AssignmentConfig())
T1_START = PlantState(e=(3, 3), lam=(3, 3), tau=(1, 2, 2), d_status=(0, 0))


def constant_policies(models, a, d):
    a_id = asg.enumerate_assignments(models.assignment.n, models.assignment.m).index(a)
    d_id = mnt.enumerate_decisions(models.maintenance).index(d)
    return (
        Policy(np.full(asg.assignment_state_count(models.assignment), a_id)),
        Policy(np.full(mnt.state_count(models.maintenance), d_id)),
    )


class TestBridge:
    def test_trajectory_one_start(self):
        got = bridge_states(T1_START.maintenance_state, (0, 0), (0, 1, 2, 3))
        assert got == asg.AssignmentState(lam=(3, 3), tau_bar=(1, 2, 2), d_status=(0, 0))

    def test_inactive_tasks(self):
        got = bridge_states(MaintenanceState((1, 1), (1, 1), (0, 0, 0)), (0, 0), (0, 1, 2, 3))
        assert got.tau_bar == (0, 0, 0)

    def test_collapsing_map(self):
        got = bridge_states(MaintenanceState((1,), (1,), (1, 2, 3)), (2,), (0, 1, 1, 1))
        assert got.tau_bar == (1, 1, 1) and got.d_status == (2,)

    def test_short_map(self):
        with pytest.raises(ValueError):
            bridge_states(MaintenanceState((1,), (1,), (3,)), (0,), (0, 1))


class TestSteps:
    def test_most_likely(self):
        assert max_likelihood_step([(4, 0.8), (9, 0.2)]) == 4
        assert max_likelihood_step([(4, 0.2), (9, 0.8)]) == 9

    def test_tie_lowest_index(self):
        assert max_likelihood_step([(9, 0.5), (4, 0.5)]) == 4

    def test_table_complement(self):
        cfg = MaintenanceConfig(n=1, m=0)
        src = mnt.encode_state(MaintenanceState((2,), (1,), ()), cfg)
        dist = mnt.successor_distribution(src, (0,), cfg, MaintenanceChains())
        assert max_likelihood_step(dist) == src

    def test_point_mass(self):
        for seed in range(5):
            assert sampled_step([(7, 1.0)], np.random.default_rng(seed)) == 7

    def test_seeded_repeatable(self):
        dist = [(0, 0.3), (1, 0.3), (2, 0.4)]
        a = [sampled_step(dist, np.random.default_rng(42)) for _ in range(3)]
        rng1, rng2 = np.random.default_rng(9), np.random.default_rng(9)
        assert [sampled_step(dist, rng1) for _ in range(50)] == [sampled_step(dist, rng2) for _ in range(50)]
        assert len(set(a)) == 1

    def test_frequency(self):
        rng = np.random.default_rng(2024)
        counts = Counter(sampled_step([(1, 0.8), (2, 0.2)], rng) for _ in range(10_000))
        assert counts[1] / 10_000 == pytest.approx(0.8, abs=0.02)

    def test_rejects_non_distribution(self):
        with pytest.raises(ValueError):
            sampled_step([(1, 0.5)], np.random.default_rng(0))
        with pytest.raises(ValueError):
            max_likelihood_step([])


class TestIntervention:
    def test_override(self):
        override = PlantState((3, 3), (3, 3), (1, 2, 2), (0, 0))
        start = PlantState((1, 2), (5, 6), (0, 0, 0), (3, 3))
        assert apply_intervention(start, Intervention(4, override), MODELS) == override

    def test_identity(self):
        assert apply_intervention(T1_START, Intervention(1, T1_START), MODELS) == T1_START

    def test_alphabet_error(self):
        with pytest.raises(ValueError):
            apply_intervention(T1_START, Intervention(1, PlantState((3, 3), (9, 3), (1, 2, 2), (0, 0))), MODELS)

    def test_beyond_horizon(self):
        with pytest.raises(ValueError):
            TrajectoryConfig(T1_START, 3, (Intervention(4, T1_START),))


class TestClosedLoop:
    def test_assigned_tasks_complete(self):
        pa, pm = constant_policies(MODELS, (1, 2), (0, 0))
        log = run_closed_loop(pa, pm, MODELS, CouplingRules(), TrajectoryConfig(T1_START, 2))
        assert log.records[0].assignment == (1, 2)
        assert log.records[1].state.tau[:2] == (0, 0)
        assert log.records[1].state.tau[2] == 2

    def test_unavailable_machine_does_not_complete(self):
        start = PlantState((1, 1), (1, 1), (1, 0, 0), (3, 0))
        pa, pm = constant_policies(MODELS, (1, 0), (0, 0))
        log = run_closed_loop(pa, pm, MODELS, CouplingRules(), TrajectoryConfig(start, 1))
        assert log.final.tau[0] == 1
        assert log.final.d_status == (0, 0)

    def test_intervention_flag_and_effect(self):
        pa, pm = constant_policies(MODELS, (0, 0), (0, 0))
        start = PlantState((1, 1), (1, 1), (0, 0, 0), (0, 0))
        ivs = (Intervention(2, T1_START),)
        log = run_closed_loop(pa, pm, MODELS, CouplingRules(), TrajectoryConfig(start, 4, ivs))
        assert [r.intervention for r in log.records] == [False, True, False, False]
        assert log.records[2].state == T1_START

    def test_seeded_runs_identical(self):
        pa, pm = constant_policies(MODELS, (3, 1), (1, 0))
        tc = TrajectoryConfig(T1_START, 7, seed=11)
        a = run_closed_loop(pa, pm, MODELS, CouplingRules(), tc)
        b = run_closed_loop(pa, pm, MODELS, CouplingRules(), tc)
        assert a == b

    def test_policy_size_mismatch(self):
        pa, pm = constant_policies(MODELS, (0, 0), (0, 0))
        with pytest.raises(SimulationError):
            run_closed_loop(Policy(pa.decision[:10]), pm, MODELS, CouplingRules(), TrajectoryConfig(T1_START))

    def test_csv_layout(self, tmp_path):
        pa, pm = constant_policies(MODELS, (0, 0), (0, 0))
        log = run_closed_loop(pa, pm, MODELS, CouplingRules(), TrajectoryConfig(T1_START, 3))
        write_trajectory_csv(log, tmp_path / "t.csv", 2, 3)
        rows = read_trajectory_csv(tmp_path / "t.csv")
        assert [r["epoch"] for r in rows] == ["1", "2", "3", "4"]
        assert rows[0]["lambda_1"] == "3" and rows[0]["tau_2"] == "2"
        assert rows[-1]["a_1"] == "" and rows[-1]["intervention"] == "0"


def _run(default_config, solved_assignment, solved_maintenance, name):
    cfg = default_config
    return run_closed_loop(
        solved_assignment.policy, solved_maintenance.policy, cfg.closed_loop_models(), cfg.coupling, cfg.trajectories[name]
    )


@pytest.mark.slow
def test_trajectory_one(default_config, solved_assignment, solved_maintenance):
    log = _run(default_config, solved_assignment, solved_maintenance, "t1")
    assert len(log) == 7
    assert any(log.records[0].maintenance)
    states = [r.state for r in log.records] + [log.final]
    first_idle = next(i for i, s in enumerate(states) if not any(s.tau))
    assert first_idle + 1 <= 4


@pytest.mark.slow
def test_trajectory_two(default_config, solved_assignment, solved_maintenance):
    log = _run(default_config, solved_assignment, solved_maintenance, "t2")
    assert all(not any(r.maintenance) for r in log.records[:3])
    assert log.records[3].intervention
    assert any(any(r.maintenance) for r in log.records[4:5])
    assert not any(log.final.tau)


@pytest.mark.slow
def test_idle_healthy_plant_stays_put(default_config, solved_assignment, solved_maintenance):
    start = PlantState((1, 1), (1, 1), (0, 0, 0), (0, 0))
    cfg = default_config
    log = run_closed_loop(
        solved_assignment.policy, solved_maintenance.policy, cfg.closed_loop_models(), cfg.coupling,
        TrajectoryConfig(start, 7),
    )
    for r in log.records:
        assert 3 not in r.maintenance
        assert not any(r.state.tau)


@pytest.mark.slow
@pytest.mark.parametrize("seed", [None, 1, 2, 3])
def test_log_is_replayable(default_config, solved_assignment, solved_maintenance, seed):
    cfg = default_config
    tc = TrajectoryConfig(cfg.trajectories["t2"].initial, 7, cfg.trajectories["t2"].interventions, seed)
    log = run_closed_loop(solved_assignment.policy, solved_maintenance.policy, cfg.closed_loop_models(), cfg.coupling, tc)
    m_dec = mnt.enumerate_decisions(cfg.maintenance)
    a_dec = asg.enumerate_assignments(cfg.assignment.n, cfg.assignment.m)
    for r in log.records:
        a_idx = asg.encode_state(bridge_states(r.state.maintenance_state, r.state.d_status, cfg.tau_map), cfg.assignment)
        assert r.assignment == a_dec[solved_assignment.policy[a_idx]]
        assert r.maintenance == m_dec[solved_maintenance.policy[mnt.encode_state(r.state.maintenance_state, cfg.maintenance)]]
    assert sum(r.intervention for r in log.records) == 1
