"""Coupled maintenance and task-assignment MDPs for machine fleets."""

from .mdp import (
    MdpModel,
    Policy,
    SolveReport,
    ValueFunction,
    bellman_backup,
    evaluate_policy,
    extract_policy,
    validate_model,
    value_iteration,
)

__all__ = [
    "MdpModel",
    "Policy",
    "SolveReport",
    "ValueFunction",
    "bellman_backup",
    "evaluate_policy",
    "extract_policy",
    "validate_model",
    "value_iteration",
]
