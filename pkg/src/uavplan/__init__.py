"""Trajectory and communication planning for a pair of cooperating UAVs.

One UAV collects uplink data from ground sensor nodes while the other
broadcasts to ground access points on the same band.  The package provides
the scenario model, expected channel gains and rates, a global polyblock
method for fixed trajectories, and an alternating surrogate method for the
joint design.
"""

from .channel import ExpectedGains, expected_gains, expected_rate_sandwich, sample_rician_power
from .poa import poa_solve, recover_schedule
from .rates import evaluate_objective, evaluate_penalized_objective
from .scenario import (
    Endpoints,
    PowerAllocation,
    ScenarioConfig,
    Schedule,
    Solution,
    Trajectory,
    load_scenario,
    load_scenario_file,
    validate_solution,
)

__all__ = [
    "Endpoints", "ExpectedGains", "PowerAllocation", "ScenarioConfig", "Schedule", "Solution", "Trajectory",
    "evaluate_objective", "evaluate_penalized_objective", "expected_gains", "expected_rate_sandwich",
    "load_scenario", "load_scenario_file", "poa_solve", "recover_schedule", "sample_rician_power",
    "validate_solution",
]
