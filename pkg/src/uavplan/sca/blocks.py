"""One surrogate solve per block: scheduling, trajectory, power."""

from __future__ import annotations

import logging

import cvxpy as cp
import numpy as np

from ..channel import ExpectedGains
from ..kernel import SmoothConvexProgram, maximize_concave, solve_conic, solve_linear_program
from ..rates import LOG2E, downlink_rates, uplink_rates
from ..scenario import PowerAllocation, ScenarioConfig, Schedule, Trajectory
from .surrogates import linearize_power, linearize_trajectory, scheduling_coefficients

log = logging.getLogger(__name__)

TRAJ_SCALE = 100.0  # metres per model length unit
UPSILON_FLOOR = 1e-3  # m^2
COLLISION_MARGIN = 1e-2  # m^2, absorbs conic solver tolerance
SPEED_MARGIN = 1e-4  # m per slot


# ---------------------------------------------------------------------------
# Scheduling


def _slot_simplex_lp(c: np.ndarray) -> np.ndarray:
    """max sum c * z over z in [0, 1], each column summing to at most 1."""
    rows, N = c.shape
    A = np.zeros((N, rows * N))
    for n in range(N):
        A[n, n::N] = 1.0
    z = solve_linear_program(c.ravel(), A, np.ones(N), 0.0, 1.0, maximize=True)
    return z.reshape(rows, N)


def solve_scheduling_block(cfg: ScenarioConfig, gains: ExpectedGains, power: PowerAllocation, sched_r: Schedule) -> Schedule:
    """Raise the linearised objective over the relaxed schedule.

    The downlink rate is replaced by its tangent in y (a global lower bound),
    which leaves a product of x with an affine function of y.  That is handled
    by two exact linear programs: first y with x held at ``sched_r.x``, then x
    with the true downlink rates at the new y.
    """
    noise = cfg.noise_power
    r_s = uplink_rates(gains, power, noise)
    rate_r, A = scheduling_coefficients(cfg, gains, power, sched_r)
    # d/dy_k of beta2 * sum_l x_l (rate_r - sum_k A (y - y_r))
    c_y = cfg.weight_beta1 * r_s - cfg.weight_beta2 * np.einsum("kln,ln->kn", A, sched_r.x)
    y = _slot_simplex_lp(c_y)
    r_u = downlink_rates(gains, power, Schedule(sched_r.x, y), noise)
    x = _slot_simplex_lp(cfg.weight_beta2 * r_u)
    return Schedule(x, y)


# ---------------------------------------------------------------------------
# Power


def solve_power_block(cfg: ScenarioConfig, gains: ExpectedGains, sched: Schedule, power_r: PowerAllocation,
                      fixed_zero: np.ndarray | None = None) -> PowerAllocation:
    """Maximise the difference-of-concave surrogate over the power boxes.

    ``fixed_zero`` optionally pins powers to zero: a boolean mask over the
    packed vector (p_u per slot, then p_s by SN and slot).
    """
    lin = linearize_power(cfg, gains, sched, power_r)
    z0 = lin.pack(lin.a_r, lin.b_r)
    upper = np.ones_like(z0)
    if fixed_zero is not None:
        upper = np.where(fixed_zero, 0.0, upper)
        z0 = np.minimum(z0, upper)
    prog = SmoothConvexProgram(objective=lin.value, gradient=lin.gradient, lower=np.zeros_like(z0), upper=upper)
    res = maximize_concave(prog, np.clip(z0, 0.0, 1.0), tol=1e-9, max_iter=2000)
    a, b = lin.unpack(res.point)
    return PowerAllocation(p_u=np.clip(a, 0, 1) * cfg.p_max_uav, p_s=np.clip(b, 0, 1) * cfg.p_max_sn)


# ---------------------------------------------------------------------------
# Trajectory


def _squared_distance(q, H, node):
    return cp.square(q[:, 0] - node[0]) + cp.square(q[:, 1] - node[1]) + cp.square(H)


def solve_trajectory_block(cfg: ScenarioConfig, sched: Schedule, power: PowerAllocation, traj_r: Trajectory,
                           vary_altitude: bool = True) -> Trajectory | None:
    """Maximise the trajectory surrogate; ``None`` when the solver fails.

    Model lengths are in units of ``TRAJ_SCALE`` metres.  Speed, altitude and
    collision limits carry small margins so that solver tolerances never turn
    into violations of the real limits.  A UAV whose endpoints are exactly a
    full flight budget apart keeps its straight horizontal path.
    """
    s = TRAJ_SCALE
    lin = linearize_trajectory(cfg, sched, power, traj_r, scale=s)
    N = cfg.N
    sn, ap = cfg.sn_positions / s, cfg.ap_positions / s
    cons = []
    var = {}
    for tag, q_r, H_r, ep in (("u", traj_r.q_u, traj_r.H_u, cfg.uav_ap), ("b", traj_r.q_b, traj_r.H_b, cfg.uav_bs)):
        slack = N * cfg.step_xy - float(np.linalg.norm(ep.q_f - ep.q_i))
        margin = min(SPEED_MARGIN, 0.25 * slack / N)
        if margin <= 1e-9 * cfg.step_xy:
            q = cp.Constant(q_r / s)
        else:
            q = cp.Variable((N + 1, 2))
            cons += [q[0] == ep.q_i / s, q[N] == ep.q_f / s,
                     cp.norm(q[1:] - q[:-1], 2, axis=1) <= (cfg.step_xy - margin) / s]
        if vary_altitude:
            H = cp.Variable(N + 1)
            zm = min(SPEED_MARGIN, 0.25 * cfg.step_z)
            cons += [H[0] == ep.h_i / s, H[N] == ep.h_f / s,
                     cp.abs(H[1:] - H[:-1]) <= (cfg.step_z - zm) / s,
                     H >= cfg.h_min / s, H <= cfg.h_max / s]
        else:
            H = cp.Constant(H_r / s)
        var[tag] = (q, H)
    (q_u, H_u), (q_b, H_b) = var["u"], var["b"]

    delta = cp.hstack([q_u[1:] - q_b[1:], cp.reshape(H_u[1:] - H_b[1:], (N, 1), order="C")])
    psi = lin.D_r + 2.0 * cp.sum(cp.multiply(lin.delta_r, delta - lin.delta_r), axis=1)
    ups = cp.Variable(N)
    cons += [ups >= UPSILON_FLOOR / s**2, ups <= psi, psi >= (cfg.d_min**2 + COLLISION_MARGIN) / s**2]

    obj = 0.0
    wy_col = lin.wy.sum(axis=0)  # (N,)
    for k in range(cfg.K):
        if not np.any(lin.wy[k] > 0):
            continue
        Zb = _squared_distance(q_b[1:], H_b[1:], sn[k])
        obj += cp.sum(cp.multiply(lin.wy[k], lin.F_r[k] + lin.omega1[k] * lin.Zb_r[k] + lin.omega2[k] * lin.D_r))
        obj -= cp.sum(cp.multiply(lin.wy[k] * lin.omega1[k], Zb))
        obj -= cp.sum(cp.multiply(lin.wy[k] * lin.omega2[k], ups))
    active = (lin.B > 0) & (wy_col > 0)
    if np.any(active):
        idx = np.flatnonzero(active)
        # log2(1 + B ups^-c) = log2(e) * logistic(log B - c log ups)
        arg = np.log(lin.B[idx]) - lin.c_u * cp.log(ups[idx])
        obj -= LOG2E * cp.sum(cp.multiply(wy_col[idx], cp.logistic(arg)))
    for l in range(cfg.L):
        if not np.any(lin.wx[l] > 0):
            continue
        Zu = _squared_distance(q_u[1:], H_u[1:], ap[l])
        obj += cp.sum(cp.multiply(lin.wx[l], lin.R_r[l] + lin.S2[l] * lin.Zu_r[l]))
        obj -= cp.sum(cp.multiply(lin.wx[l] * lin.S2[l], Zu))

    prob = cp.Problem(cp.Maximize(obj), cons)
    status = solve_conic(prob)
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        log.info("trajectory block solver status %s; keeping the previous trajectory", status)
        return None

    def value(expr, fallback):
        return np.asarray(expr.value if expr.value is not None else fallback, dtype=float) * s

    out_qu, out_Hu = value(q_u, traj_r.q_u / s), value(H_u, traj_r.H_u / s)
    out_qb, out_Hb = value(q_b, traj_r.q_b / s), value(H_b, traj_r.H_b / s)
    # Pin boundary values and altitude limits exactly (tiny solver drift).
    for q, H, ep in ((out_qu, out_Hu, cfg.uav_ap), (out_qb, out_Hb, cfg.uav_bs)):
        q[0], q[-1] = ep.q_i, ep.q_f
        H[0], H[-1] = ep.h_i, ep.h_f
        np.clip(H, cfg.h_min, cfg.h_max, out=H)
    return Trajectory(q_u=out_qu, H_u=out_Hu, q_b=out_qb, H_b=out_Hb)
