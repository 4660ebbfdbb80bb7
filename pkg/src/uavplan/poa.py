"""Globally optimal scheduling and power for a fixed trajectory.

The binary schedule is absorbed into penalised powers p~ (a transmitter whose
power is zero is simply not scheduled) and the problem is rewritten over SINR
targets, where it becomes a monotonic program.  A polyblock outer
approximation shrinks towards the upper boundary of the feasible SINR region;
each vertex is projected onto that boundary by bisection on a ray, with one
LP feasibility test per slot and trial step.

Bisection leaves a small shell of undecided targets, so the search polyblock
alone does not certify an upper bound.  A companion polyblock is cut at the
exact largest feasible scale of each ray (a Perron root) and its maximum is
reported as the upper bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import matrix_balance

from .channel import ExpectedGains, expected_gains
from .kernel import LinearFeasibilityProblem, check_linear_feasibility
from .rates import LOG2E, assemble_solution
from .scenario import PowerAllocation, ScenarioConfig, Schedule, Solution, Trajectory

log = logging.getLogger(__name__)

DEFAULT_MAX_DIM = 16


class PoaDimensionError(ValueError):
    """The SINR vector is too long for the polyblock method (vertex explosion)."""


class ScheduleRecoveryError(ValueError):
    def __init__(self, side: str, slot: int, values):
        self.side, self.slot, self.values = side, slot, np.asarray(values)
        super().__init__(f"more than one active {side} in slot {slot}: powers {self.values.tolist()}")


@dataclass(frozen=True)
class PenalizedPower:
    """Per-node powers with the schedule folded in: p_s (K, N) and p_u (L, N)."""

    p_s: np.ndarray
    p_u: np.ndarray

    @classmethod
    def zeros(cls, K: int, L: int, N: int) -> "PenalizedPower":
        return cls(np.zeros((K, N)), np.zeros((L, N)))


# A SINR vertex is a flat array of length (K+L)N: chi[k, n] in row-major order
# followed by chi_bar[l, n].


def split_vertex(v: np.ndarray, K: int, L: int, N: int):
    v = np.asarray(v, dtype=float)
    return v[: K * N].reshape(K, N), v[K * N:].reshape(L, N)


def join_vertex(chi: np.ndarray, chi_bar: np.ndarray) -> np.ndarray:
    return np.concatenate([np.ravel(chi), np.ravel(chi_bar)])


def initial_vertex(gains: ExpectedGains, cfg: ScenarioConfig) -> np.ndarray:
    """SINRs of each link at full power with no interference at all."""
    chi = gains.h * cfg.p_max_sn / cfg.noise_power
    chi_bar = gains.g * cfg.p_max_uav / cfg.noise_power
    return join_vertex(chi, chi_bar)


def _weights(cfg: ScenarioConfig, K: int, L: int, N: int) -> np.ndarray:
    return np.concatenate([np.full(K * N, cfg.weight_beta1), np.full(L * N, cfg.weight_beta2)])


def sinr_objective(v: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted sum of log2(1 + v) along the last axis."""
    return np.log1p(np.asarray(v)) @ weights * LOG2E


# ---------------------------------------------------------------------------
# Feasibility of SINR targets in one slot


def slot_feasibility(gains: ExpectedGains, cfg: ScenarioConfig, n: int, chi: np.ndarray, chi_bar: np.ndarray):
    """Can the targets ``chi`` (K,) and ``chi_bar`` (L,) be met in slot column ``n``?

    Returns ``(feasible, p_s, p_u)`` with the least-total-power witness.
    Transmitters with a zero target are switched off: that never hurts any
    other link.  Two positive targets on one side need
    ``h_i h_k >= t_i t_k M^2`` (multiply the two SINR rows), which settles the
    common case exactly before any LP is built.
    """
    K, L = chi.size, chi_bar.size
    M, noise = cfg.penalty_M, cfg.noise_power
    ps_max, pu_max = cfg.p_max_sn, cfg.p_max_uav
    p_s, p_u = np.zeros(K), np.zeros(L)
    act_s = np.flatnonzero(chi > 0)
    act_u = np.flatnonzero(chi_bar > 0)
    if act_s.size == 0 and act_u.size == 0:
        return True, p_s, p_u

    h, g = gains.h[:, n], gains.g[:, n]
    for act, t, gain in ((act_s, chi, h), (act_u, chi_bar, g)):
        for a in range(act.size):
            for b in range(a + 1, act.size):
                i, k = act[a], act[b]
                if gain[i] * gain[k] < t[i] * t[k] * M * M:
                    return False, p_s, p_u

    ns, nu = act_s.size, act_u.size
    rows, rhs = [], []
    # Variables: u = p / p_max for the active SNs, then the active APs.
    for a, k in enumerate(act_s):
        row = np.zeros(ns + nu)
        row[:ns] = -chi[k] * M * ps_max
        row[a] = h[k] * ps_max
        row[ns:] = -chi[k] * gains.f[n] * pu_max
        rows.append(row / noise)
        rhs.append(chi[k])
    for b, l in enumerate(act_u):
        row = np.zeros(ns + nu)
        row[ns:] = -chi_bar[l] * M * pu_max
        row[ns + b] = g[l] * pu_max
        row[:ns] = -chi_bar[l] * gains.h_g2g[act_s, l] * ps_max
        rows.append(row / noise)
        rhs.append(chi_bar[l])
    A = np.array(rows)
    prob = LinearFeasibilityProblem(np.zeros(ns + nu), np.ones(ns + nu), A, np.array(rhs), (">=",) * len(rows))
    try:
        res = check_linear_feasibility(prob, cost=np.ones(ns + nu))
    except ValueError as exc:  # solver rejected the coefficient range
        log.debug("slot %d LP rejected (%s); treating as infeasible", n, exc)
        return False, p_s, p_u
    if not res.feasible:
        return False, p_s, p_u
    p_s[act_s] = res.witness[:ns] * ps_max
    p_u[act_u] = res.witness[ns:] * pu_max
    return True, p_s, p_u


def _slot_coupling(gains: ExpectedGains, cfg: ScenarioConfig, n: int, act_s, act_u):
    """Noise-normalised direct gains ``a`` and cross gains ``C`` for powers scaled to [0, 1]."""
    M, noise = cfg.penalty_M, cfg.noise_power
    ps_max, pu_max = cfg.p_max_sn, cfg.p_max_uav
    ns, nu = act_s.size, act_u.size
    a = np.concatenate([gains.h[act_s, n] * ps_max, gains.g[act_u, n] * pu_max]) / noise
    C = np.zeros((ns + nu, ns + nu))
    C[:ns, :ns] = M * ps_max / noise
    C[:ns, ns:] = gains.f[n] * pu_max / noise
    C[ns:, ns:] = M * pu_max / noise
    C[ns:, :ns] = gains.h_g2g[np.ix_(act_s, act_u)].T * ps_max / noise
    np.fill_diagonal(C, 0.0)
    return a, C


def slot_max_scale(gains: ExpectedGains, cfg: ScenarioConfig, n: int, chi: np.ndarray, chi_bar: np.ndarray) -> float:
    """Exact largest ``lam`` with ``lam * (chi, chi_bar)`` feasible in slot ``n``.

    With scaled powers u in [0, 1] the targets read u >= lam D (C u + 1),
    D = diag(target / a).  The max-min weighted SINR under per-transmitter
    power limits is 1 / max_j rho(D (C + 1 e_j^T)), rho the Perron root.
    Returns ``inf`` when no target is positive.
    """
    act_s, act_u = np.flatnonzero(chi > 0), np.flatnonzero(chi_bar > 0)
    m = act_s.size + act_u.size
    if m == 0:
        return np.inf
    a, C = _slot_coupling(gains, cfg, n, act_s, act_u)
    D = np.concatenate([chi[act_s], chi_bar[act_u]]) / a
    rho = 0.0
    for j in range(m):
        B = C.copy()
        B[:, j] += 1.0
        B *= D[:, None]
        balanced, _ = matrix_balance(B, permute=False)
        rho = max(rho, float(np.max(np.abs(np.linalg.eigvals(balanced)))))
    return 1.0 / rho


def max_feasible_scale(v: np.ndarray, gains: ExpectedGains, cfg: ScenarioConfig) -> float:
    """Exact largest ``lam`` with ``lam * v`` feasible (all slots)."""
    chi, chi_bar = split_vertex(v, gains.K, gains.L, gains.N)
    return min(slot_max_scale(gains, cfg, n, chi[:, n], chi_bar[:, n]) for n in range(gains.N))


def targets_feasible(v: np.ndarray, gains: ExpectedGains, cfg: ScenarioConfig):
    """Feasibility of a whole SINR vector; returns ``(feasible, PenalizedPower | None)``."""
    K, L, N = gains.K, gains.L, gains.N
    chi, chi_bar = split_vertex(v, K, L, N)
    power = PenalizedPower.zeros(K, L, N)
    for n in range(N):
        ok, p_s, p_u = slot_feasibility(gains, cfg, n, chi[:, n], chi_bar[:, n])
        if not ok:
            return False, None
        power.p_s[:, n], power.p_u[:, n] = p_s, p_u
    return True, power


@dataclass(frozen=True)
class Projection:
    lam: float
    point: np.ndarray
    power: PenalizedPower
    lam_upper: float = 1.0  # infeasible end of the final bracket (1 when v is feasible)


def project_to_boundary(v, gains: ExpectedGains, cfg: ScenarioConfig, eps: float = 1e-2) -> Projection:
    """Bisection for the largest feasible ``lam`` in [0, 1] along the ray ``lam v``.

    A vertex that is already feasible projects onto itself with ``lam = 1``.
    Otherwise the returned ``lam`` is the feasible end of the final bracket
    and ``lam_upper`` the infeasible end.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("SINR vertex must be componentwise >= 0")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    ok, power = targets_feasible(v, gains, cfg)
    if ok:
        return Projection(1.0, v.copy(), power)
    lo, hi = 0.0, 1.0
    ok, best = targets_feasible(np.zeros_like(v), gains, cfg)
    if not ok:
        raise RuntimeError("zero SINR targets reported infeasible")
    while hi - lo > eps:
        mid = 0.5 * (lo + hi)
        ok, power = targets_feasible(mid * v, gains, cfg)
        if ok:
            lo, best = mid, power
        else:
            hi = mid
    return Projection(lo, lo * v, best, hi)


# ---------------------------------------------------------------------------
# Polyblock outer approximation


@dataclass
class Polyblock:
    vertices: np.ndarray  # (m, dim) search vertices, cut at the bisection point
    values: np.ndarray  # objective at each vertex
    bounds: np.ndarray  # (m, dim) companion vertices, cut at the exact boundary
    bound_values: np.ndarray
    iteration: int = 0
    best_value: float = -np.inf
    best_point: np.ndarray | None = None
    best_power: PenalizedPower | None = None
    upper_bound: float = np.inf


@dataclass
class PoaResult:
    power: PenalizedPower
    lower_bound: float
    upper_bound: float
    iterations: int
    certified: bool
    trace: list = field(default_factory=list)


# Relative safety factor on the exact boundary scale (eigenvalue round-off).
_BOUND_SLACK = 1e-9


def _poa_core(gains: ExpectedGains, cfg: ScenarioConfig, eps: float, max_iters: int, prune: bool) -> PoaResult:
    K, L, N = gains.K, gains.L, gains.N
    w = _weights(cfg, K, L, N)
    v1 = initial_vertex(gains, cfg)
    f1 = np.atleast_1d(sinr_objective(v1, w))
    block = Polyblock(v1[None, :].copy(), f1.copy(), v1[None, :].copy(), f1.copy())
    block.best_power = PenalizedPower.zeros(K, L, N)
    block.best_value = 0.0
    block.best_point = np.zeros_like(v1)
    trace = []
    certified = False

    while block.iteration < max_iters:
        block.iteration += 1
        i_star = int(np.argmax(block.values))  # first index on ties
        v, u = block.vertices[i_star], block.bounds[i_star]
        block.upper_bound = min(block.upper_bound, float(np.max(block.bound_values)))
        proj = project_to_boundary(v, gains, cfg, eps)
        value = float(sinr_objective(proj.point, w))
        if value > block.best_value:
            block.best_value, block.best_point, block.best_power = value, proj.point, proj.power
        trace.append((block.iteration, block.vertices.shape[0], block.upper_bound, block.best_value, proj.lam))

        active = v > 0
        if not np.any(active) or 1.0 - proj.lam <= eps or block.upper_bound - block.best_value <= 1e-12:
            certified = True
            break

        idx = np.flatnonzero(active)
        rows = np.arange(idx.size)
        # Search children: cut at the projected (feasible) point.
        children = np.repeat(v[None, :], idx.size, axis=0)
        children[rows, idx] = proj.point[idx]
        # Companion children: every z with z_i > lam* v_i on all active i lies
        # above an infeasible point of the ray, so removing that cone from the
        # box of u keeps every feasible target vector covered.
        cut = max_feasible_scale(v, gains, cfg) * (1.0 + _BOUND_SLACK)
        companions = np.repeat(u[None, :], idx.size, axis=0)
        companions[rows, idx] = np.minimum(u[idx], cut * v[idx])

        rest = np.delete(block.vertices, i_star, axis=0)
        rest_vals = np.delete(block.values, i_star)
        rest_b = np.delete(block.bounds, i_star, axis=0)
        rest_bvals = np.delete(block.bound_values, i_star)
        if prune and rest.shape[0]:
            # Drop a pair only when both members are dominated by one other pair.
            dominated = np.array([
                np.any(np.all(c <= rest, axis=1) & np.all(b <= rest_b, axis=1))
                for c, b in zip(children, companions)
            ])
            children, companions = children[~dominated], companions[~dominated]
        block.vertices = np.vstack([rest, children])
        block.values = np.concatenate([rest_vals, sinr_objective(children, w)])
        block.bounds = np.vstack([rest_b, companions])
        block.bound_values = np.concatenate([rest_bvals, sinr_objective(companions, w)])
        if block.vertices.shape[0] == 0:
            certified = True
            block.upper_bound = min(block.upper_bound, block.best_value)
            break
    else:
        block.upper_bound = min(block.upper_bound, float(np.max(block.bound_values)))

    if not certified:
        log.warning("polyblock search stopped after %d iterations without certification", block.iteration)
    return PoaResult(block.best_power, block.best_value, block.upper_bound, block.iteration, certified, trace)


def _slot_gains(gains: ExpectedGains, n: int) -> ExpectedGains:
    return ExpectedGains(gains.h[:, n:n + 1], gains.g[:, n:n + 1], gains.f[n:n + 1], gains.h_g2g)


def poa_optimize(
    cfg: ScenarioConfig,
    gains: ExpectedGains,
    eps: float = 1e-2,
    max_iters: int = 10_000,
    prune: bool = True,
    mode: str = "auto",
    max_dim: int = DEFAULT_MAX_DIM,
) -> PoaResult:
    """Polyblock search on precomputed gains.

    ``mode="joint"`` runs one search over all (K+L)N SINR targets.
    ``mode="by-slot"`` runs one search per slot; this is exact because both
    the objective and the feasible region are products over slots, and it is
    much faster: a joint ray projection is held back by the tightest slot.
    ``auto`` uses the joint search only for a single slot.
    """
    K, L, N = gains.K, gains.L, gains.N
    dim = (K + L) * N
    if mode == "auto":
        mode = "joint" if N == 1 else "by-slot"
    if mode == "joint":
        if dim > max_dim:
            raise PoaDimensionError(f"(K+L)N = {dim} exceeds the guard {max_dim}")
        res = _poa_core(gains, cfg, eps, max_iters, prune)
        res.trace = [(0,) + row for row in res.trace]
        return res
    if mode != "by-slot":
        raise ValueError(f"unknown POA mode {mode!r}")
    if K + L > max_dim:
        raise PoaDimensionError(f"K+L = {K + L} exceeds the guard {max_dim}")

    power = PenalizedPower.zeros(K, L, N)
    lower = upper = 0.0
    iters, certified, trace = 0, True, []
    for n in range(N):
        res = _poa_core(_slot_gains(gains, n), cfg, eps, max_iters, prune)
        power.p_s[:, n], power.p_u[:, n] = res.power.p_s[:, 0], res.power.p_u[:, 0]
        lower += res.lower_bound
        upper += res.upper_bound
        iters += res.iterations
        certified &= res.certified
        trace.extend((n + 1,) + row for row in res.trace)
    return PoaResult(power, lower, upper, iters, certified, trace)


def recover_schedule(tilde: PenalizedPower, activity_threshold: float | tuple = 1e-7):
    """Binary schedule and powers from penalised powers.

    ``activity_threshold`` is absolute (watts), either one value or a pair
    (SN side, UAV side).  Raises :class:`ScheduleRecoveryError` when two
    transmitters on one side exceed it in the same slot.
    """
    thr_s, thr_u = (activity_threshold, activity_threshold) if np.isscalar(activity_threshold) else activity_threshold
    p_s_t, p_u_t = np.asarray(tilde.p_s, float), np.asarray(tilde.p_u, float)
    K, N = p_s_t.shape
    L = p_u_t.shape[0]
    y, x = np.zeros((K, N)), np.zeros((L, N))
    p_s, p_u = np.zeros((K, N)), np.zeros(N)
    for n in range(N):
        on_s = np.flatnonzero(p_s_t[:, n] > thr_s)
        on_u = np.flatnonzero(p_u_t[:, n] > thr_u)
        if on_s.size > 1:
            raise ScheduleRecoveryError("SN", n + 1, p_s_t[on_s, n])
        if on_u.size > 1:
            raise ScheduleRecoveryError("AP", n + 1, p_u_t[on_u, n])
        if on_s.size:
            y[on_s[0], n] = 1.0
            p_s[on_s[0], n] = p_s_t[on_s[0], n]
        if on_u.size:
            x[on_u[0], n] = 1.0
            p_u[n] = p_u_t[on_u[0], n]
    return Schedule(x, y, binary=True), PowerAllocation(p_u, p_s)


def poa_solve(
    cfg: ScenarioConfig,
    traj: Trajectory,
    eps: float = 1e-2,
    max_iters: int = 10_000,
    prune: bool = True,
    mode: str = "auto",
    max_dim: int = DEFAULT_MAX_DIM,
) -> Solution:
    """Global communication design for a fixed trajectory, as a Solution."""
    gains = expected_gains(cfg, traj)
    res = poa_optimize(cfg, gains, eps, max_iters, prune, mode, max_dim)
    sched, power = recover_schedule(res.power, (1e-6 * cfg.p_max_sn, 1e-6 * cfg.p_max_uav))
    diagnostics = {
        "solver": "poa",
        "certified": res.certified,
        "iterations": res.iterations,
        "lower_bound": res.lower_bound,
        "upper_bound": res.upper_bound,
        "gap": res.upper_bound - res.lower_bound,
        "trace": res.trace,
        "penalized_power": res.power,
    }
    return assemble_solution(cfg, traj, sched, power, gains, diagnostics)
