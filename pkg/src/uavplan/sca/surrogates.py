"""Concave lower bounds of the relaxed objective, one per variable block.

Each bound is tight at its expansion point and lies below the true relaxed
objective everywhere on the block's feasible set.  The numpy evaluators here
are the reference definitions; the block solvers build the same expressions
in their own modelling layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import ExpectedGains
from ..rates import LOG2E, rate_breakdown
from ..scenario import PowerAllocation, ScenarioConfig, Schedule, Trajectory



# ---------------------------------------------------------------------------
# Scheduling block: the downlink rate is convex in y, so its tangent is a
# global lower bound.


def downlink_interference(cfg: ScenarioConfig, gains: ExpectedGains, power: PowerAllocation, y: np.ndarray) -> np.ndarray:
    """Ground-to-ground interference plus noise at each AP, shape (L, N)."""
    return gains.h_g2g.T @ (y * power.p_s) + cfg.noise_power


def scheduling_coefficients(cfg, gains: ExpectedGains, power: PowerAllocation, sched_r: Schedule):
    """Downlink rates at ``sched_r`` and their slopes A[k, l, n] >= 0 in -y."""
    interf = downlink_interference(cfg, gains, power, sched_r.y)
    signal = gains.g * power.p_u[None, :]
    rate_r = np.log1p(signal / interf) * LOG2E
    # d rate / d y_k = -log2(e) * signal * h~_kl p_k / (interf * (interf + signal))
    scale = LOG2E * signal / (interf * (interf + signal))  # (L, N)
    A = gains.h_g2g[:, :, None] * power.p_s[:, None, :] * scale[None, :, :]  # (K, L, N)
    return rate_r, A


def scheduling_surrogate(cfg, gains, power, sched_r: Schedule, sched: Schedule) -> float:
    r_s = np.log1p(gains.h * power.p_s / (gains.f * power.p_u + cfg.noise_power)[None, :]) * LOG2E
    rate_r, A = scheduling_coefficients(cfg, gains, power, sched_r)
    dy = sched.y - sched_r.y
    phi = rate_r - np.einsum("kln,kn->ln", A, dy)
    return float(cfg.weight_beta1 * np.sum(sched.y * r_s) + cfg.weight_beta2 * np.sum(sched.x * phi))


# ---------------------------------------------------------------------------
# Power block: each rate is a difference of two concave logs; the subtracted
# one is replaced by its tangent (an upper bound).


@dataclass(frozen=True)
class PowerLinearization:
    """Noise-normalised gains for powers scaled to [0, 1]."""

    Hs: np.ndarray  # (K, N) h p_s_max / noise
    Fu: np.ndarray  # (N,)   f p_u_max / noise
    Gu: np.ndarray  # (L, N) g p_u_max / noise
    Hg: np.ndarray  # (K, L) h~ p_s_max / noise
    wy: np.ndarray  # (K, N) beta1 * y
    wx: np.ndarray  # (L, N) beta2 * x
    y: np.ndarray
    a_r: np.ndarray  # (N,)
    b_r: np.ndarray  # (K, N)

    @property
    def K(self):
        return self.Hs.shape[0]

    @property
    def N(self):
        return self.Hs.shape[1]

    def pack(self, a, b) -> np.ndarray:
        return np.concatenate([np.ravel(a), np.ravel(b)])

    def unpack(self, z):
        return z[: self.N], z[self.N:].reshape(self.K, self.N)

    def _parts(self, z):
        a, b = self.unpack(z)
        up_in = 1.0 + self.Hs * b + self.Fu * a  # (K, N)
        ifr = np.einsum("kl,kn->ln", self.Hg, self.y * b)  # (L, N)
        ifr_r = np.einsum("kl,kn->ln", self.Hg, self.y * self.b_r)
        down_in = 1.0 + self.Gu * a + ifr
        return a, b, up_in, ifr, ifr_r, down_in

    def value(self, z) -> float:
        a, b, up_in, ifr, ifr_r, down_in = self._parts(z)
        up_tan = np.log1p(self.Fu * self.a_r) + self.Fu * (a - self.a_r) / (1.0 + self.Fu * self.a_r)
        down_tan = np.log1p(ifr_r) + (ifr - ifr_r) / (1.0 + ifr_r)
        up = np.log(up_in) - up_tan[None, :]
        down = np.log(down_in) - down_tan
        return float((np.sum(self.wy * up) + np.sum(self.wx * down)) * LOG2E)

    def gradient(self, z) -> np.ndarray:
        a, b, up_in, ifr, ifr_r, down_in = self._parts(z)
        wu = self.wy / up_in  # (K, N)
        wd = self.wx / down_in  # (L, N)
        slope_u = self.Fu / (1.0 + self.Fu * self.a_r)
        g_a = np.sum(wu * self.Fu[None, :], axis=0) - np.sum(self.wy, axis=0) * slope_u + np.sum(wd * self.Gu, axis=0)
        tan_d = self.wx / (1.0 + ifr_r)  # (L, N)
        g_b = wu * self.Hs + self.y * (np.einsum("kl,ln->kn", self.Hg, wd) - np.einsum("kl,ln->kn", self.Hg, tan_d))
        return self.pack(g_a, g_b) * LOG2E


def linearize_power(cfg: ScenarioConfig, gains: ExpectedGains, sched: Schedule, power_r: PowerAllocation) -> PowerLinearization:
    s2 = cfg.noise_power
    return PowerLinearization(
        Hs=gains.h * cfg.p_max_sn / s2,
        Fu=gains.f * cfg.p_max_uav / s2,
        Gu=gains.g * cfg.p_max_uav / s2,
        Hg=gains.h_g2g * cfg.p_max_sn / s2,
        wy=cfg.weight_beta1 * sched.y,
        wx=cfg.weight_beta2 * sched.x,
        y=np.asarray(sched.y),
        a_r=power_r.p_u / cfg.p_max_uav,
        b_r=power_r.p_s / cfg.p_max_sn,
    )


def power_surrogate(cfg, gains, sched, power_r: PowerAllocation, power: PowerAllocation) -> float:
    lin = linearize_power(cfg, gains, sched, power_r)
    return lin.value(lin.pack(power.p_u / cfg.p_max_uav, power.p_s / cfg.p_max_sn))


# ---------------------------------------------------------------------------
# Trajectory block.  Rates are written through squared distances Z and a slack
# Upsilon <= (squared UAV separation); every log term is convex in those, so
# tangents give lower bounds, except the interference-only term which stays
# concave in Upsilon and is kept exact.


@dataclass(frozen=True)
class TrajectoryLinearization:
    """Expansion data in length units of ``scale`` metres (slots 1..N)."""

    scale: float
    traj_r: Trajectory
    Zb_r: np.ndarray  # (K, N) squared distance SN k -> UAV-BS
    Zu_r: np.ndarray  # (L, N) squared distance UAV-AP -> AP l
    D_r: np.ndarray  # (N,) squared UAV separation
    delta_r: np.ndarray  # (N, 3) w_u - w_b at the expansion point
    A: np.ndarray  # (K, N) uplink signal constant, rate term A * Zb^{-c_s}
    B: np.ndarray  # (N,)   interference constant, B * Upsilon^{-c_u}
    S: np.ndarray  # (L, N) downlink constant, S * Zu^{-c_a}
    c_s: float
    c_u: float
    c_a: float
    F_r: np.ndarray  # (K, N) log2(1 + A Zb_r^{-c_s} + B D_r^{-c_u})
    omega1: np.ndarray  # (K, N) >= 0
    omega2: np.ndarray  # (K, N) >= 0
    R_r: np.ndarray  # (L, N) downlink rate at the expansion point
    S2: np.ndarray  # (L, N) >= 0
    wy: np.ndarray  # (K, N) beta1 * y
    wx: np.ndarray  # (L, N) beta2 * x

    def psi(self, traj: Trajectory) -> np.ndarray:
        """Tangent of the squared separation; never above the true value."""
        delta = (traj.w_u[1:] - traj.w_b[1:]) / self.scale
        return self.D_r + 2.0 * np.sum(self.delta_r * (delta - self.delta_r), axis=1)

    def distances(self, traj: Trajectory, sn_positions, ap_positions):
        return scaled_distances(traj, sn_positions, ap_positions, self.scale)

    def value(self, traj: Trajectory, sn_positions, ap_positions, upsilon=None) -> float:
        """Surrogate objective; ``upsilon`` defaults to the largest allowed slack."""
        Zb, Zu = self.distances(traj, sn_positions, ap_positions)
        ups = self.psi(traj) if upsilon is None else np.asarray(upsilon, float) / self.scale**2
        if np.any(ups <= 0):
            return -np.inf
        interf = np.log1p(self.B * ups ** (-self.c_u)) * LOG2E
        up = self.F_r - self.omega1 * (Zb - self.Zb_r) - self.omega2 * (ups - self.D_r)[None] - interf[None]
        down = self.R_r - self.S2 * (Zu - self.Zu_r)
        return float(np.sum(self.wy * up) + np.sum(self.wx * down))


def scaled_distances(traj: Trajectory, sn_positions, ap_positions, scale: float):
    """Squared distances SN->UAV-BS (K, N) and UAV-AP->AP (L, N) in units of scale^2."""
    qb, Hb = traj.q_b[1:] / scale, traj.H_b[1:] / scale
    qu, Hu = traj.q_u[1:] / scale, traj.H_u[1:] / scale
    Zb = np.sum((qb[None] - sn_positions[:, None] / scale) ** 2, axis=2) + Hb[None] ** 2
    Zu = np.sum((qu[None] - ap_positions[:, None] / scale) ** 2, axis=2) + Hu[None] ** 2
    return Zb, Zu


def linearize_trajectory(cfg: ScenarioConfig, sched: Schedule, power: PowerAllocation, traj_r: Trajectory, scale: float = 1.0) -> TrajectoryLinearization:
    s = float(scale)
    c_s, c_u, c_a = cfg.kappa_s / 2.0, cfg.kappa_u / 2.0, cfg.kappa_a / 2.0
    noise = cfg.noise_power
    # beta0 / (s^2 Z)^c = (beta0 s^{-2c}) Z^{-c}
    A = cfg.beta0 * s ** (-2 * c_s) * power.p_s / noise
    B = cfg.beta0 * s ** (-2 * c_u) * power.p_u / noise
    ground = np.sum((cfg.sn_positions[:, None, :] - cfg.ap_positions[None, :, :]) ** 2, axis=2)
    h_g2g = cfg.beta0 / ground ** (cfg.alpha_g2g / 2.0)
    I = h_g2g.T @ (sched.y * power.p_s) + noise  # (L, N)
    S = cfg.beta0 * s ** (-2 * c_a) * power.p_u[None, :] / I

    delta_r = (traj_r.w_u[1:] - traj_r.w_b[1:]) / s
    D_r = np.sum(delta_r**2, axis=1)
    Zb_r, Zu_r = scaled_distances(traj_r, cfg.sn_positions, cfg.ap_positions, s)
    sig = A * Zb_r ** (-c_s)
    ifr = B * D_r ** (-c_u)
    inner = 1.0 + sig + ifr[None]
    snr = S * Zu_r ** (-c_a)
    return TrajectoryLinearization(
        scale=s, traj_r=traj_r, Zb_r=Zb_r, Zu_r=Zu_r, D_r=D_r, delta_r=delta_r, A=A, B=B, S=S,
        c_s=c_s, c_u=c_u, c_a=c_a,
        F_r=np.log(inner) * LOG2E,
        omega1=LOG2E * c_s * sig / Zb_r / inner,
        omega2=LOG2E * c_u * ifr[None] / D_r[None] / inner,
        R_r=np.log1p(snr) * LOG2E,
        S2=LOG2E * c_a * snr / Zu_r / (1.0 + snr),
        wy=cfg.weight_beta1 * sched.y, wx=cfg.weight_beta2 * sched.x,
    )


def trajectory_surrogate(cfg, sched, power, traj_r: Trajectory, traj: Trajectory, upsilon=None) -> float:
    lin = linearize_trajectory(cfg, sched, power, traj_r)
    return lin.value(traj, cfg.sn_positions, cfg.ap_positions, upsilon)


def true_objective(cfg, gains, sched, power) -> float:
    return rate_breakdown(cfg, gains, sched, power).objective
