"""Per-slot expected rates and the weighted-sum objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ExpectedGains, expected_gains
from .scenario import PowerAllocation, ScenarioConfig, Schedule, Solution, Trajectory

LOG2E = 1.0 / np.log(2.0)


def _log2_1p(snr):
    return np.log1p(np.maximum(snr, 0.0)) * LOG2E


@dataclass(frozen=True)
class RateBreakdown:
    r_s: np.ndarray  # (K, N) uplink rates, bits/s/Hz
    r_u: np.ndarray  # (L, N) downlink rates
    objective: float
    uplink_total: float  # beta-unweighted sums of scheduled rates
    downlink_total: float


def uplink_rates(gains: ExpectedGains, power: PowerAllocation, noise: float) -> np.ndarray:
    interference = gains.f * power.p_u + noise
    return _log2_1p(gains.h * power.p_s / interference[None, :])


def downlink_rates(gains: ExpectedGains, power: PowerAllocation, sched: Schedule, noise: float) -> np.ndarray:
    # (L, N): sum_k h_g2g[k, l] * y[k, n] * p_s[k, n]
    interference = gains.h_g2g.T @ (sched.y * power.p_s) + noise
    return _log2_1p(gains.g * power.p_u[None, :] / interference)


def uplink_rate(gains: ExpectedGains, power: PowerAllocation, k: int, n: int, noise: float) -> float:
    """Expected uplink rate of SN ``k`` in slot column ``n`` (0-based)."""
    sinr = gains.h[k, n] * power.p_s[k, n] / (gains.f[n] * power.p_u[n] + noise)
    return float(_log2_1p(sinr))


def downlink_rate(gains: ExpectedGains, power: PowerAllocation, sched: Schedule, l: int, n: int, noise: float) -> float:
    interference = float(np.dot(gains.h_g2g[:, l], sched.y[:, n] * power.p_s[:, n])) + noise
    return float(_log2_1p(gains.g[l, n] * power.p_u[n] / interference))


def rate_breakdown(cfg: ScenarioConfig, gains: ExpectedGains, sched: Schedule, power: PowerAllocation) -> RateBreakdown:
    r_s = uplink_rates(gains, power, cfg.noise_power)
    r_u = downlink_rates(gains, power, sched, cfg.noise_power)
    up = float(np.sum(sched.y * r_s))
    down = float(np.sum(sched.x * r_u))
    return RateBreakdown(r_s, r_u, cfg.weight_beta1 * up + cfg.weight_beta2 * down, up, down)


def evaluate_objective(cfg: ScenarioConfig, traj: Trajectory, sched: Schedule, power: PowerAllocation) -> RateBreakdown:
    return rate_breakdown(cfg, expected_gains(cfg, traj), sched, power)


def objective_value(cfg, gains, sched, power) -> float:
    return rate_breakdown(cfg, gains, sched, power).objective


def evaluate_penalized_objective(cfg: ScenarioConfig, gains: ExpectedGains, tilde_power) -> float:
    """Objective of the penalty reformulation for powers p~_s (K, N) and p~_u (L, N).

    Every SN and AP is treated as active; simultaneous transmissions on one
    side are suppressed by the penalty factor M.
    """
    ps, pu = np.asarray(tilde_power.p_s, dtype=float), np.asarray(tilde_power.p_u, dtype=float)
    M, noise = cfg.penalty_M, cfg.noise_power
    other_s = ps.sum(axis=0)[None, :] - ps
    other_u = pu.sum(axis=0)[None, :] - pu
    up = gains.h * ps / (M * other_s + gains.f[None, :] * pu.sum(axis=0)[None, :] + noise)
    down = gains.g * pu / (M * other_u + gains.h_g2g.T @ ps + noise)
    return float(cfg.weight_beta1 * np.sum(_log2_1p(up)) + cfg.weight_beta2 * np.sum(_log2_1p(down)))


def assemble_solution(cfg, traj, sched, power, gains=None, diagnostics=None) -> Solution:
    if gains is None:
        gains = expected_gains(cfg, traj)
    rates = rate_breakdown(cfg, gains, sched, power)
    return Solution(traj, sched, power, rates.objective, rates, dict(diagnostics or {}))


def throughput_mbps(cfg: ScenarioConfig, objective: float) -> float:
    """Display conversion of a summed spectral efficiency into Mbit per period."""
    return objective * cfg.bandwidth_B * cfg.slot_delta / 1e6
