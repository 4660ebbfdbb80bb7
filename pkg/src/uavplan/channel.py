"""Expected large-scale channel gains and Rician fading samplers.

The solvers only ever see expected gains: with unit-mean small-scale fading the
expected power gain of each link equals its distance-dependent path loss.
``expected_rate_sandwich`` checks the log-of-ratio-of-means rate approximation
against Jensen-type bounds on sampled channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import ScenarioConfig, Trajectory

RNG_ALGORITHM = "PCG64"


class ChannelGeometryError(ValueError):
    """Two nodes of a link coincide, so the path loss is undefined."""


@dataclass(frozen=True)
class ExpectedGains:
    """Linear expected power gains for slots 1..N (column j is slot j+1)."""

    h: np.ndarray  # (K, N) SN k -> UAV-BS
    g: np.ndarray  # (L, N) UAV-AP -> AP l
    f: np.ndarray  # (N,)   UAV-AP -> UAV-BS
    h_g2g: np.ndarray  # (K, L) SN k -> AP l

    @property
    def K(self) -> int:
        return self.h.shape[0]

    @property
    def L(self) -> int:
        return self.g.shape[0]

    @property
    def N(self) -> int:
        return self.f.shape[0]


def air_ground_gain(beta0: float, dist_sq: np.ndarray, kappa: float) -> np.ndarray:
    return beta0 / np.power(dist_sq, kappa / 2.0)


def expected_gains(cfg: ScenarioConfig, traj: Trajectory) -> ExpectedGains:
    if traj.N != cfg.N:
        raise ValueError(f"trajectory has {traj.N} slots, scenario has {cfg.N}")
    q_b, H_b = traj.q_b[1:], traj.H_b[1:]
    q_u, H_u = traj.q_u[1:], traj.H_u[1:]

    z_b = np.sum((q_b[None, :, :] - cfg.sn_positions[:, None, :]) ** 2, axis=2) + H_b[None, :] ** 2
    z_u = np.sum((q_u[None, :, :] - cfg.ap_positions[:, None, :]) ** 2, axis=2) + H_u[None, :] ** 2
    d_uu = np.sum((q_u - q_b) ** 2, axis=1) + (H_u - H_b) ** 2
    d_gg = np.sum((cfg.sn_positions[:, None, :] - cfg.ap_positions[None, :, :]) ** 2, axis=2)

    if np.any(d_gg <= 0.0):
        k, l = np.argwhere(d_gg <= 0.0)[0]
        raise ChannelGeometryError(f"SN {k} and AP {l} share a location")
    if np.any(d_uu <= 0.0):
        n = int(np.flatnonzero(d_uu <= 0.0)[0]) + 1
        raise ChannelGeometryError(f"UAVs coincide at slot {n}")

    return ExpectedGains(
        h=air_ground_gain(cfg.beta0, z_b, cfg.kappa_s),
        g=air_ground_gain(cfg.beta0, z_u, cfg.kappa_a),
        f=air_ground_gain(cfg.beta0, d_uu, cfg.kappa_u),
        h_g2g=cfg.beta0 / np.power(d_gg, cfg.alpha_g2g / 2.0),
    )


def sample_rician_power(K_factor: float, rng_seed: int, count: int) -> np.ndarray:
    """Draw ``count`` unit-mean samples of |h|^2 for Rician factor ``K_factor``.

    The line-of-sight phase is uniform on [0, 2pi) per sample.  Uses numpy's
    PCG64 generator seeded with ``rng_seed``.
    """
    if K_factor < 0:
        raise ValueError("Rician factor must be >= 0")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=count)
    scatter = (rng.standard_normal(count) + 1j * rng.standard_normal(count)) / np.sqrt(2.0)
    los = np.sqrt(K_factor / (K_factor + 1.0)) * np.exp(1j * theta)
    h = los + np.sqrt(1.0 / (K_factor + 1.0)) * scatter
    return np.abs(h) ** 2


@dataclass(frozen=True)
class SandwichReport:
    lower: float
    approx: float
    upper: float
    empirical: float
    empirical_stderr: float
    samples: int

    def approx_within_bounds(self) -> bool:
        return self.lower <= self.approx <= self.upper

    def empirical_within_bounds(self, n_stderr: float = 3.0) -> bool:
        slack = n_stderr * self.empirical_stderr
        return self.lower - slack <= self.empirical <= self.upper + slack

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "approx": self.approx,
            "upper": self.upper,
            "empirical": self.empirical,
            "empirical_stderr": self.empirical_stderr,
            "samples": self.samples,
        }


def expected_rate_sandwich(x_samples, y_samples) -> SandwichReport:
    """Compare E[log2(1 + X/Y)] with log2(1 + E[X]/E[Y]) and its Jensen bounds.

    X and Y are independent, so E[X/Y] = E[X] E[1/Y] and E[Y/X] = E[Y] E[1/X]
    are formed from separate sample means.  With that factorisation the chain
    lower <= approx <= upper holds exactly by the AM-HM inequality, whereas the
    paired empirical mean only satisfies it up to sampling noise.  Any X sample
    equal to zero makes E[1/X] infinite and the lower bound 0.
    """
    x = np.asarray(x_samples, dtype=float).ravel()
    y = np.asarray(y_samples, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("need at least one sample of each variable")
    if np.any(x < 0) or np.any(y <= 0):
        raise ValueError("x samples must be >= 0 and y samples > 0")

    mean_x, mean_y = float(np.mean(x)), float(np.mean(y))
    upper = float(np.log2(1.0 + mean_x * np.mean(1.0 / y)))
    approx = float(np.log2(1.0 + mean_x / mean_y))
    if np.any(x == 0.0):
        lower = 0.0
    else:
        lower = float(np.log2(1.0 + 1.0 / (mean_y * np.mean(1.0 / x))))

    n = min(x.size, y.size)
    paired = np.log2(1.0 + x[:n] / y[:n])
    stderr = float(np.std(paired, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    empirical = float(np.mean(paired))
    return SandwichReport(lower, approx, upper, empirical, stderr, n)
