"""Alternating (block coordinate) ascent over schedule, trajectory and power."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..channel import expected_gains
from ..rates import assemble_solution, rate_breakdown
from ..scenario import PowerAllocation, ScenarioConfig, Schedule, Solution, Trajectory, validate_solution
from .blocks import solve_power_block, solve_scheduling_block, solve_trajectory_block
from .init import init_circular, init_straight

log = logging.getLogger(__name__)

SCHEMES = ("3D traj & power", "2D traj & power", "3D traj & no power", "2D traj & no power", "only power")
MONOTONE_TOL = 1e-6
ROUND_THRESHOLD = 0.1


class MonotonicityError(RuntimeError):
    """An accepted block lowered the objective: a bug, never expected."""


@dataclass(frozen=True)
class BcdOptions:
    eps: float = 1e-2
    max_outer: int = 25
    inner_iters: int = 1
    repair_iters: int = 3
    optimize_trajectory: bool = True
    vary_altitude: bool = True
    optimize_power: bool = True


@dataclass
class BcdState:
    traj: Trajectory
    sched: Schedule
    power: PowerAllocation
    gains: object
    objective: float
    iteration: int = 0
    history: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @classmethod
    def start(cls, cfg, traj, sched, power) -> "BcdState":
        gains = expected_gains(cfg, traj)
        obj = rate_breakdown(cfg, gains, sched, power).objective
        return cls(traj, sched, power, gains, obj, history=[obj])


def _improves(new: float, old: float) -> bool:
    return new > old


def _schedule_step(cfg, st: BcdState, opts: BcdOptions) -> float:
    gained = 0.0
    for _ in range(opts.inner_iters):
        cand = solve_scheduling_block(cfg, st.gains, st.power, st.sched)
        val = rate_breakdown(cfg, st.gains, cand, st.power).objective
        if not _improves(val, st.objective):
            break
        gained += val - st.objective
        st.sched, st.objective = cand, val
    return gained


def _trajectory_step(cfg, st: BcdState, opts: BcdOptions) -> float:
    gained = 0.0
    for _ in range(opts.inner_iters):
        cand = solve_trajectory_block(cfg, st.sched, st.power, st.traj, vary_altitude=opts.vary_altitude)
        if cand is None:
            break
        probe = assemble_solution(cfg, cand, st.sched, st.power)
        bad = [v for v in validate_solution(cfg, probe, tol=1e-9) if not v.constraint.startswith(("schedule", "power"))]
        if bad:
            log.info("trajectory candidate rejected: %s", bad[0])
            break
        if not _improves(probe.objective_value, st.objective):
            break
        gained += probe.objective_value - st.objective
        st.traj, st.objective = cand, probe.objective_value
        st.gains = expected_gains(cfg, cand)
    return gained


def _power_step(cfg, st: BcdState, opts: BcdOptions, fixed_zero=None, iters=None) -> float:
    gained = 0.0
    for _ in range(iters or opts.inner_iters):
        cand = solve_power_block(cfg, st.gains, st.sched, st.power, fixed_zero)
        val = rate_breakdown(cfg, st.gains, st.sched, cand).objective
        if not _improves(val, st.objective):
            break
        gained += val - st.objective
        st.power, st.objective = cand, val
    return gained


def round_schedule(sched: Schedule, threshold: float = ROUND_THRESHOLD) -> Schedule:
    """Per slot and side, keep the largest entry if it reaches ``threshold``."""

    def side(z):
        z = np.asarray(z)
        out = np.zeros_like(z)
        top = np.argmax(z, axis=0)
        cols = np.arange(z.shape[1])
        keep = z[top, cols] >= threshold
        out[top[keep], cols[keep]] = 1.0
        return out

    return Schedule(side(sched.x), side(sched.y), binary=True)


def _silence_idle(sched: Schedule, power: PowerAllocation) -> PowerAllocation:
    """Switch off transmitters that are not scheduled (never lowers the objective)."""
    p_u = np.where(sched.x.sum(axis=0) > 0, power.p_u, 0.0)
    p_s = np.where(sched.y > 0, power.p_s, 0.0)
    return PowerAllocation(p_u, p_s)


def run_bcd(cfg: ScenarioConfig, opts: BcdOptions, traj: Trajectory, sched: Schedule, power: PowerAllocation,
            info: dict | None = None) -> Solution:
    """Alternate the blocks from the given point, then round and repair."""
    st = BcdState.start(cfg, traj, sched, power)
    diagnostics = {"solver": "bcd", "init": dict(info or {})}
    if cfg.weight_beta1 == 0 and cfg.weight_beta2 == 0:
        diagnostics.update(history=st.history, trace=[], converged=True, outer_iterations=0)
        return assemble_solution(cfg, st.traj, st.sched, st.power, st.gains, diagnostics)

    converged = False
    for r in range(1, opts.max_outer + 1):
        prev = st.objective
        d_sched = _schedule_step(cfg, st, opts)
        d_traj = _trajectory_step(cfg, st, opts) if opts.optimize_trajectory else 0.0
        d_pow = _power_step(cfg, st, opts) if opts.optimize_power else 0.0
        st.iteration = r
        st.history.append(st.objective)
        residual = max((v.magnitude for v in validate_solution(cfg, assemble_solution(cfg, st.traj, st.sched, st.power, st.gains))), default=0.0)
        st.trace.append((r, st.objective, d_sched, d_traj, d_pow, residual))
        if st.objective < prev - MONOTONE_TOL:
            raise MonotonicityError(f"objective fell from {prev} to {st.objective} at outer iteration {r}")
        if st.objective - prev < opts.eps * abs(prev) or st.objective == prev:
            converged = True
            break

    relaxed = st.objective
    st.sched = round_schedule(st.sched)
    st.power = _silence_idle(st.sched, st.power)
    st.objective = rate_breakdown(cfg, st.gains, st.sched, st.power).objective
    rounded = st.objective
    if opts.optimize_power:
        N = cfg.N
        idle = np.concatenate([st.sched.x.sum(axis=0) == 0, (st.sched.y == 0).ravel()])
        _power_step(cfg, st, opts, fixed_zero=idle, iters=opts.repair_iters)
    diagnostics.update(
        history=st.history, trace=st.trace, converged=converged, outer_iterations=st.iteration,
        relaxed_objective=relaxed, rounded_objective=rounded,
    )
    return assemble_solution(cfg, st.traj, st.sched, st.power, st.gains, diagnostics)


def bcd_solve(cfg: ScenarioConfig, opts: BcdOptions | None = None) -> Solution:
    """Joint trajectory and communication design from the circular start."""
    opts = opts or BcdOptions()
    traj, sched, power, info = init_circular(cfg)
    return run_bcd(cfg, opts, traj, sched, power, info)


def scheme_options(scheme: str, base: BcdOptions | None = None) -> BcdOptions:
    base = base or BcdOptions()
    table = {
        "3D traj & power": dict(),
        "2D traj & power": dict(vary_altitude=False),
        "3D traj & no power": dict(optimize_power=False),
        "2D traj & no power": dict(vary_altitude=False, optimize_power=False),
        "only power": dict(optimize_trajectory=False),
    }
    if scheme not in table:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    fields = {**base.__dict__, **table[scheme]}
    return BcdOptions(**fields)


def run_benchmark_scheme(cfg: ScenarioConfig, scheme: str, opts: BcdOptions | None = None) -> Solution:
    """Run one of the named schemes; all share the same blocks and stopping rule."""
    so = scheme_options(scheme, opts)
    if scheme == "only power":
        traj = init_straight(cfg)
        sched, power = Schedule.uniform(cfg.K, cfg.L, cfg.N), PowerAllocation.full(cfg)
        sol = run_bcd(cfg, so, traj, sched, power, {"trajectory": "straight"})
    else:
        traj, sched, power, info = init_circular(cfg)
        sol = run_bcd(cfg, so, traj, sched, power, info)
    sol.diagnostics["scheme"] = scheme
    return sol


def sca_communication_design(cfg: ScenarioConfig, traj: Trajectory, opts: BcdOptions | None = None) -> Solution:
    """Schedule and power only, for a given trajectory (local counterpart of the global method)."""
    so = BcdOptions(**{**(opts or BcdOptions()).__dict__, "optimize_trajectory": False})
    sol = run_bcd(cfg, so, traj, Schedule.uniform(cfg.K, cfg.L, cfg.N), PowerAllocation.full(cfg), {"trajectory": "fixed"})
    sol.diagnostics["scheme"] = "communication design"
    return sol
