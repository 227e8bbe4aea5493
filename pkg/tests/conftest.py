"""Shared fixtures: the case-study models are built and solved once per session."""

import time
from dataclasses import dataclass

import pytest

from cbm_mdp import assignment as asg
from cbm_mdp import maintenance as mnt
from cbm_mdp.config import RunConfig, load_config
from cbm_mdp.mdp import MdpModel, Policy, SolveReport, ValueFunction, extract_policy, value_iteration


@dataclass
class Solved:
    model: MdpModel
    values: ValueFunction
    report: SolveReport
    policy: Policy
    seconds: float


def _solve(model, cfg):
    start = time.perf_counter()
    values, report = value_iteration(model, cfg.tolerance, cfg.max_iterations)
    policy = extract_policy(model, values)
    return Solved(model, values, report, policy, time.perf_counter() - start)


@pytest.fixture(scope="session")
def default_config() -> RunConfig:
    return load_config()


@pytest.fixture(scope="session")
def solved_maintenance(default_config) -> Solved:
    cfg = default_config
    return _solve(mnt.build_maintenance_mdp(cfg.maintenance, cfg.maintenance_chains, cfg.discount), cfg)


@pytest.fixture(scope="session")
def solved_assignment(default_config) -> Solved:
    cfg = default_config
    return _solve(asg.build_assignment_mdp(cfg.assignment, cfg.assignment_chains(), cfg.discount), cfg)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
