"""Starting trajectories for the alternating optimization."""

from __future__ import annotations

import numpy as np

from ..scenario import Endpoints, PowerAllocation, ScenarioConfig, Schedule, Trajectory

COLLISION_MARGIN = 1e-3  # m^2 kept above d_min^2 by constructed paths


class InitializationError(ValueError):
    pass


def altitude_profile(cfg: ScenarioConfig, ep: Endpoints) -> np.ndarray:
    """Hold the initial altitude, then move to the final one as late as possible."""
    n = np.arange(cfg.N + 1)
    room = (cfg.N - n) * cfg.step_z
    H = ep.h_f + np.clip(ep.h_i - ep.h_f, -room, room)
    return np.clip(H, cfg.h_min, cfg.h_max)


def _sample_polyline(points: list, arcs: list, N: int) -> np.ndarray:
    """N+1 positions at equal path length along straight legs and circle arcs.

    ``points`` are leg endpoints; ``arcs`` maps a leg index to
    ``(center, radius, start_angle, sweep)`` when that leg is a circular arc.
    """
    lengths = []
    for i in range(len(points) - 1):
        if i in arcs:
            lengths.append(abs(arcs[i][3]) * arcs[i][1])
        else:
            lengths.append(float(np.linalg.norm(points[i + 1] - points[i])))
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    total = cum[-1]
    out = np.empty((N + 1, 2))
    for j, s in enumerate(np.linspace(0.0, total, N + 1)):
        i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(lengths) - 1)
        frac = 0.0 if lengths[i] == 0 else (s - cum[i]) / lengths[i]
        if i in arcs:
            c, r, a0, sweep = arcs[i]
            ang = a0 + frac * sweep
            out[j] = c + r * np.array([np.cos(ang), np.sin(ang)])
        else:
            out[j] = points[i] + frac * (points[i + 1] - points[i])
    out[0], out[-1] = points[0], points[-1]
    return out


def circular_path(cfg: ScenarioConfig, ep: Endpoints, center: np.ndarray):
    """Horizontal path: fly to the circle, loop once, fly to the final point.

    The radius starts at V_xy T / (2 pi) and shrinks until the legs to and from
    the circle fit in the flight budget.  When even a zero radius does not fit,
    the straight line between the endpoints is used.  Returns (path, radius).
    """
    budget = cfg.N * cfg.step_xy
    d_in = float(np.linalg.norm(ep.q_i - center))
    entry_dir = (ep.q_i - center) / d_in if d_in > 0 else np.array([1.0, 0.0])

    def layout(r):
        entry = center + r * entry_dir
        length = abs(d_in - r) + 2 * np.pi * r + float(np.linalg.norm(ep.q_f - entry))
        return entry, length

    r_c = cfg.v_xy_max * cfg.period_T / (2 * np.pi)
    r = r_c
    if layout(r)[1] > budget:
        lo, hi = 0.0, r_c
        if layout(0.0)[1] > budget:
            return straight_path(cfg, ep), 0.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if layout(mid)[1] <= budget else (lo, mid)
        r = lo
    entry, _ = layout(r)
    a0 = float(np.arctan2(entry_dir[1], entry_dir[0]))
    points = [ep.q_i, entry, entry, ep.q_f]
    path = _sample_polyline(points, {1: (center, r, a0, 2 * np.pi)}, cfg.N)
    return path, r


def straight_path(cfg: ScenarioConfig, ep: Endpoints) -> np.ndarray:
    t = np.linspace(0.0, 1.0, cfg.N + 1)[:, None]
    return ep.q_i[None, :] + t * (ep.q_f - ep.q_i)[None, :]


def separate_altitudes(cfg: ScenarioConfig, q_u, H_u, q_b, H_b):
    """Push the UAVs apart vertically, symmetrically, wherever they are too close."""
    H_u, H_b = H_u.copy(), H_b.copy()
    need = cfg.d_min**2 + COLLISION_MARGIN
    horiz = np.sum((q_u - q_b) ** 2, axis=1)
    vert_need = np.sqrt(np.maximum(need - horiz, 0.0))
    gap = np.abs(H_u - H_b)
    deficit = np.maximum(vert_need - gap, 0.0)
    if not np.any(deficit > 0):
        return H_u, H_b
    # Spread each half-deficit over neighbours at half the climb rate so both
    # UAVs together stay within the vertical speed limit.
    half = deficit / 2.0
    rate = cfg.step_z / 2.0
    n = np.arange(cfg.N + 1)
    offset = np.max(half[None, :] - rate * np.abs(n[:, None] - n[None, :]), axis=1).clip(min=0.0)
    sign = np.where(H_u >= H_b, 1.0, -1.0)
    H_u = H_u + sign * offset
    H_b = H_b - sign * offset
    if np.any(H_u < cfg.h_min) or np.any(H_u > cfg.h_max) or np.any(H_b < cfg.h_min) or np.any(H_b > cfg.h_max):
        raise InitializationError("no feasible vertical separation inside the altitude limits")
    return H_u, H_b


def _check(cfg: ScenarioConfig, traj: Trajectory, what: str):
    from ..scenario import validate_solution
    from ..rates import assemble_solution

    sched = Schedule.uniform(cfg.K, cfg.L, cfg.N)
    sol = assemble_solution(cfg, traj, sched, PowerAllocation.full(cfg))
    bad = validate_solution(cfg, sol, tol=1e-9)
    if bad:
        raise InitializationError(f"{what} trajectory infeasible: {bad[0]}")


def init_circular(cfg: ScenarioConfig):
    """Circles around the node centroids, uniform relaxed schedule, full power.

    Returns ``(trajectory, schedule, power, info)``; ``info`` records the radii.
    """
    ge_b = cfg.sn_positions.mean(axis=0)
    ge_u = cfg.ap_positions.mean(axis=0)
    q_b, r_b = circular_path(cfg, cfg.uav_bs, ge_b)
    q_u, r_u = circular_path(cfg, cfg.uav_ap, ge_u)
    H_b = altitude_profile(cfg, cfg.uav_bs)
    H_u = altitude_profile(cfg, cfg.uav_ap)
    H_u, H_b = separate_altitudes(cfg, q_u, H_u, q_b, H_b)
    traj = Trajectory(q_u=q_u, H_u=H_u, q_b=q_b, H_b=H_b)
    _check(cfg, traj, "initial")
    info = {"radius_bs": r_b, "radius_ap": r_u, "nominal_radius": cfg.v_xy_max * cfg.period_T / (2 * np.pi)}
    return traj, Schedule.uniform(cfg.K, cfg.L, cfg.N), PowerAllocation.full(cfg), info


def init_straight(cfg: ScenarioConfig) -> Trajectory:
    """Constant-speed straight lines between the endpoints."""
    q_b = straight_path(cfg, cfg.uav_bs)
    q_u = straight_path(cfg, cfg.uav_ap)
    H_b = altitude_profile(cfg, cfg.uav_bs)
    H_u = altitude_profile(cfg, cfg.uav_ap)
    H_u, H_b = separate_altitudes(cfg, q_u, H_u, q_b, H_b)
    traj = Trajectory(q_u=q_u, H_u=H_u, q_b=q_b, H_b=H_b)
    _check(cfg, traj, "straight-line")
    return traj
