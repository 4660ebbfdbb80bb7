"""Local joint design by alternating surrogate maximization."""

from .bcd import (
    SCHEMES,
    BcdOptions,
    BcdState,
    MonotonicityError,
    bcd_solve,
    round_schedule,
    run_bcd,
    run_benchmark_scheme,
    sca_communication_design,
)
from .blocks import solve_power_block, solve_scheduling_block, solve_trajectory_block
from .init import InitializationError, init_circular, init_straight
from .surrogates import (
    TrajectoryLinearization,
    linearize_power,
    linearize_trajectory,
    power_surrogate,
    scheduling_surrogate,
    trajectory_surrogate,
)
