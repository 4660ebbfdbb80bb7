"""Static problem data and the solution data model shared by every solver.

Positions are indexed ``0..N`` (slot 0 is the configured start point), while
schedules, powers and rates are indexed by slot ``1..N`` and stored as arrays
with N columns (column ``j`` is slot ``j + 1``).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping

import numpy as np
import yaml


class ScenarioError(ValueError):
    """A scenario violates one of its invariants."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class ScenarioParseError(ValueError):
    """The scenario text is malformed or misses required keys."""


class DimensionError(ValueError):
    """Solution arrays do not match the scenario dimensions."""


def _frozen_array(values, shape=None, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class Endpoints:
    q_i: np.ndarray
    q_f: np.ndarray
    h_i: float
    h_f: float

    def __post_init__(self):
        object.__setattr__(self, "q_i", _frozen_array(self.q_i, (2,)))
        object.__setattr__(self, "q_f", _frozen_array(self.q_f, (2,)))
        object.__setattr__(self, "h_i", float(self.h_i))
        object.__setattr__(self, "h_f", float(self.h_f))


@dataclass(frozen=True)
class ScenarioConfig:
    """All static data of one planning instance, in SI units and linear scale."""

    sn_positions: np.ndarray
    ap_positions: np.ndarray
    uav_bs: Endpoints
    uav_ap: Endpoints
    period_T: float
    slot_count_N: int
    v_xy_max: float
    v_z_max: float
    h_min: float
    h_max: float
    d_min: float
    p_max_uav: float
    p_max_sn: float
    beta0: float
    kappa_a: float = 2.0
    kappa_s: float = 2.0
    kappa_u: float = 2.0
    alpha_g2g: float = 3.0
    rician_Ka: float = 1.0
    rician_Ks: float = 1.0
    rician_Ku: float = 1.0
    noise_power: float = 1e-14
    weight_beta1: float = 1.0
    weight_beta2: float = 1.0
    penalty_M: float = 1e5
    bandwidth_B: float = 1e6
    slot_delta: float = field(default=float("nan"))

    def __post_init__(self):
        object.__setattr__(self, "sn_positions", _frozen_array(self.sn_positions).reshape(-1, 2))
        object.__setattr__(self, "ap_positions", _frozen_array(self.ap_positions).reshape(-1, 2))
        object.__setattr__(self, "slot_count_N", int(self.slot_count_N))
        if math.isnan(self.slot_delta):
            object.__setattr__(self, "slot_delta", float(self.period_T) / max(self.slot_count_N, 1))
        self._validate()

    @property
    def K(self) -> int:
        return self.sn_positions.shape[0]

    @property
    def L(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def N(self) -> int:
        return self.slot_count_N

    @property
    def step_xy(self) -> float:
        """Largest horizontal displacement per slot."""
        return self.v_xy_max * self.slot_delta

    @property
    def step_z(self) -> float:
        return self.v_z_max * self.slot_delta

    def _validate(self):
        if self.K < 1 or self.L < 1:
            raise ScenarioError("node_count", f"need K >= 1 and L >= 1, got K={self.K}, L={self.L}")
        if self.N < 1:
            raise ScenarioError("slot_count", f"N must be >= 1, got {self.N}")
        if not math.isclose(self.slot_delta * self.N, self.period_T, rel_tol=1e-9):
            raise ScenarioError("slot_delta", f"delta*N = {self.slot_delta * self.N} != T = {self.period_T}")
        if not (0.0 < self.h_min <= self.h_max):
            raise ScenarioError("altitude_bounds", f"need 0 < h_min <= h_max, got [{self.h_min}, {self.h_max}]")
        positive = {
            "period_T": self.period_T,
            "v_xy_max": self.v_xy_max,
            "v_z_max": self.v_z_max,
            "p_max_uav": self.p_max_uav,
            "p_max_sn": self.p_max_sn,
            "beta0": self.beta0,
            "noise_power": self.noise_power,
            "penalty_M": self.penalty_M,
            "kappa_a": self.kappa_a,
            "kappa_s": self.kappa_s,
            "kappa_u": self.kappa_u,
            "alpha_g2g": self.alpha_g2g,
        }
        for name, value in positive.items():
            if not (value > 0.0 and math.isfinite(value)):
                raise ScenarioError("positivity", f"{name} must be finite and > 0, got {value}")
        if self.d_min < 0.0:
            raise ScenarioError("positivity", f"d_min must be >= 0, got {self.d_min}")
        for name in ("rician_Ka", "rician_Ks", "rician_Ku"):
            if getattr(self, name) < 0.0:
                raise ScenarioError("positivity", f"{name} must be >= 0")
        if self.weight_beta1 < 0.0 or self.weight_beta2 < 0.0:
            raise ScenarioError("weights", "beta1 and beta2 must be >= 0")
        for label, ep in (("uav_bs", self.uav_bs), ("uav_ap", self.uav_ap)):
            for h in (ep.h_i, ep.h_f):
                if not (self.h_min <= h <= self.h_max):
                    raise ScenarioError("endpoint_altitude", f"{label} altitude {h} outside [{self.h_min}, {self.h_max}]")
            dist = float(np.linalg.norm(ep.q_f - ep.q_i))
            reach = self.N * self.step_xy
            if dist > reach * (1.0 + 1e-12):
                raise ScenarioError("reachability", f"{label} endpoints {dist:.3f} m apart, only {reach:.3f} m reachable")
            if abs(ep.h_f - ep.h_i) > self.N * self.step_z * (1.0 + 1e-12):
                raise ScenarioError("reachability", f"{label} altitude change exceeds N*V_z*delta")
        for slot, (a, b) in (("initial", (self.uav_bs.q_i, self.uav_ap.q_i)), ("final", (self.uav_bs.q_f, self.uav_ap.q_f))):
            hb = self.uav_bs.h_i if slot == "initial" else self.uav_bs.h_f
            hu = self.uav_ap.h_i if slot == "initial" else self.uav_ap.h_f
            sep = float(np.sum((a - b) ** 2) + (hb - hu) ** 2)
            if sep < self.d_min**2:
                raise ScenarioError("endpoint_collision", f"{slot} UAV positions closer than d_min")

    def with_period(self, period_T: float) -> "ScenarioConfig":
        """Same scenario with a new period, keeping the slot duration."""
        n = int(round(period_T / self.slot_delta))
        return replace(self, period_T=float(period_T), slot_count_N=n, slot_delta=float(period_T) / n)

    def with_weights(self, beta1: float, beta2: float) -> "ScenarioConfig":
        return replace(self, weight_beta1=float(beta1), weight_beta2=float(beta2))

    def to_dict(self) -> dict[str, Any]:
        """Linear-scale canonical record (used for digests and reports)."""
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, np.ndarray):
                out[key] = value.tolist()
            elif isinstance(value, dict):
                out[key] = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in value.items()}
            else:
                out[key] = value
        return out

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _require(mapping: Mapping, key: str, where: str):
    if not isinstance(mapping, Mapping) or key not in mapping:
        raise ScenarioParseError(f"missing key '{key}' in {where}")
    return mapping[key]


def _endpoints(block: Mapping, where: str) -> Endpoints:
    try:
        return Endpoints(
            q_i=_require(block, "q_i", where),
            q_f=_require(block, "q_f", where),
            h_i=_require(block, "h_i", where),
            h_f=_require(block, "h_f", where),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioParseError):
            raise
        raise ScenarioParseError(f"bad endpoint data in {where}: {exc}") from exc


def scenario_from_dict(data: Mapping) -> ScenarioConfig:
    """Build a config from the documented scenario schema.

    Channel constants are given in dB: ``beta0_db`` (gain at 1 m), Rician factors
    ``K_a_db``/``K_s_db``/``K_u_db``, and ``noise_dbm``.  Linear overrides
    ``beta0``, ``K_a``/``K_s``/``K_u`` and ``noise_w`` take precedence when present.
    """
    if not isinstance(data, Mapping):
        raise ScenarioParseError("scenario document must be a mapping")
    time = _require(data, "time", "scenario")
    limits = _require(data, "limits", "scenario")
    power = _require(data, "power", "scenario")
    channel = _require(data, "channel", "scenario")
    objective = data.get("objective", {}) or {}

    T = float(_require(time, "T", "time"))
    if "N" in time:
        N = int(time["N"])
    elif "delta" in time:
        N = int(round(T / float(time["delta"])))
    else:
        raise ScenarioParseError("time needs N or delta")

    def lin(key_lin, key_db, default_db=None, conv=db_to_linear):
        if key_lin in channel:
            return float(channel[key_lin])
        if key_db in channel:
            return conv(float(channel[key_db]))
        if default_db is None:
            raise ScenarioParseError(f"missing key '{key_db}' in channel")
        return conv(default_db)

    try:
        return ScenarioConfig(
            sn_positions=np.asarray(_require(data, "sns", "scenario"), dtype=float),
            ap_positions=np.asarray(_require(data, "aps", "scenario"), dtype=float),
            uav_bs=_endpoints(_require(data, "uav_bs", "scenario"), "uav_bs"),
            uav_ap=_endpoints(_require(data, "uav_ap", "scenario"), "uav_ap"),
            period_T=T,
            slot_count_N=N,
            v_xy_max=float(_require(limits, "v_xy", "limits")),
            v_z_max=float(_require(limits, "v_z", "limits")),
            h_min=float(_require(limits, "h_min", "limits")),
            h_max=float(_require(limits, "h_max", "limits")),
            d_min=float(_require(limits, "d_min", "limits")),
            p_max_uav=float(_require(power, "p_max_uav", "power")),
            p_max_sn=float(_require(power, "p_max_sn", "power")),
            beta0=lin("beta0", "beta0_db"),
            kappa_a=float(channel.get("kappa_a", 2.0)),
            kappa_s=float(channel.get("kappa_s", 2.0)),
            kappa_u=float(channel.get("kappa_u", 2.0)),
            alpha_g2g=float(channel.get("alpha", 3.0)),
            rician_Ka=lin("K_a", "K_a_db", 0.0),
            rician_Ks=lin("K_s", "K_s_db", 0.0),
            rician_Ku=lin("K_u", "K_u_db", 0.0),
            noise_power=lin("noise_w", "noise_dbm", conv=dbm_to_watts),
            weight_beta1=float(objective.get("beta1", 1.0)),
            weight_beta2=float(objective.get("beta2", 1.0)),
            penalty_M=float(objective.get("penalty_M", 1e5)),
            bandwidth_B=float(objective.get("bandwidth_hz", 1e6)),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(f"bad scenario value: {exc}") from exc


def load_scenario(source: str) -> ScenarioConfig:
    """Parse scenario text (YAML or JSON) and validate it."""
    try:
        data = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"cannot parse scenario: {exc}") from exc
    return scenario_from_dict(data)


def load_scenario_file(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


# ---------------------------------------------------------------------------
# Solution data model


@dataclass(frozen=True)
class Trajectory:
    """Per-slot 3D positions of both UAVs, slots 0..N."""

    q_u: np.ndarray  # (N+1, 2)
    H_u: np.ndarray  # (N+1,)
    q_b: np.ndarray
    H_b: np.ndarray

    def __post_init__(self):
        for name, width in (("q_u", 2), ("q_b", 2), ("H_u", None), ("H_b", None)):
            arr = np.array(getattr(self, name), dtype=float)
            if width is not None:
                arr = arr.reshape(-1, width)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.q_u.shape[0]
        if not (self.H_u.shape == (n,) and self.q_b.shape == (n, 2) and self.H_b.shape == (n,)):
            raise DimensionError("trajectory arrays have inconsistent lengths")

    @property
    def N(self) -> int:
        return self.q_u.shape[0] - 1

    @property
    def w_u(self) -> np.ndarray:
        return np.column_stack([self.q_u, self.H_u])

    @property
    def w_b(self) -> np.ndarray:
        return np.column_stack([self.q_b, self.H_b])

    def separation_sq(self) -> np.ndarray:
        """Squared 3D distance between the UAVs for slots 0..N."""
        return np.sum((self.w_u - self.w_b) ** 2, axis=1)


@dataclass(frozen=True)
class Schedule:
    """Scheduling variables x[l][n] (UAV-AP to AP l) and y[k][n] (SN k to UAV-BS)."""

    x: np.ndarray  # (L, N)
    y: np.ndarray  # (K, N)
    binary: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen_array(np.atleast_2d(np.asarray(self.x, dtype=float))))
        object.__setattr__(self, "y", _frozen_array(np.atleast_2d(np.asarray(self.y, dtype=float))))
        if self.x.shape[1] != self.y.shape[1]:
            raise DimensionError("x and y cover different slot counts")

    @property
    def N(self) -> int:
        return self.x.shape[1]

    @classmethod
    def uniform(cls, K: int, L: int, N: int) -> "Schedule":
        return cls(x=np.full((L, N), 1.0 / L), y=np.full((K, N), 1.0 / K))


@dataclass(frozen=True)
class PowerAllocation:
    p_u: np.ndarray  # (N,)
    p_s: np.ndarray  # (K, N)

    def __post_init__(self):
        object.__setattr__(self, "p_u", _frozen_array(np.asarray(self.p_u, dtype=float).reshape(-1)))
        object.__setattr__(self, "p_s", _frozen_array(np.atleast_2d(np.asarray(self.p_s, dtype=float))))
        if self.p_s.shape[1] != self.p_u.shape[0]:
            raise DimensionError("p_u and p_s cover different slot counts")

    @classmethod
    def full(cls, cfg: ScenarioConfig) -> "PowerAllocation":
        return cls(p_u=np.full(cfg.N, cfg.p_max_uav), p_s=np.full((cfg.K, cfg.N), cfg.p_max_sn))


@dataclass(frozen=True)
class Solution:
    """Trajectory, schedule and power together with their objective value.

    Build instances through :func:`uavplan.rates.assemble_solution` so that
    ``objective_value`` always matches the components.
    """

    trajectory: Trajectory
    schedule: Schedule
    power: PowerAllocation
    objective_value: float
    rates: Any  # RateBreakdown
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Violation:
    constraint: str
    slot: int
    magnitude: float

    def __str__(self):
        return f"{self.constraint} at slot {self.slot}: {self.magnitude:.6g}"


def _check_dims(cfg: ScenarioConfig, sol: Solution):
    traj, sched, power = sol.trajectory, sol.schedule, sol.power
    expected = {
        "trajectory.q_u": ((cfg.N + 1, 2), traj.q_u.shape),
        "schedule.x": ((cfg.L, cfg.N), sched.x.shape),
        "schedule.y": ((cfg.K, cfg.N), sched.y.shape),
        "power.p_u": ((cfg.N,), power.p_u.shape),
        "power.p_s": ((cfg.K, cfg.N), power.p_s.shape),
    }
    for name, (want, got) in expected.items():
        if want != got:
            raise DimensionError(f"{name} has shape {got}, scenario needs {want}")


def validate_solution(cfg: ScenarioConfig, sol: Solution, tol: float = 1e-6) -> list[Violation]:
    """List every constraint violated by more than ``tol`` (native units).

    Speed and altitude checks are in meters per slot, collision in squared meters.
    """
    _check_dims(cfg, sol)
    traj, sched, power = sol.trajectory, sol.schedule, sol.power
    out: list[Violation] = []

    def flag(name, slots, excess):
        for n in np.flatnonzero(excess > tol):
            out.append(Violation(name, int(slots[n]), float(excess[n])))

    slots = np.arange(1, cfg.N + 1)
    flag("schedule_sum_x", slots, sched.x.sum(axis=0) - 1.0)
    flag("schedule_sum_y", slots, sched.y.sum(axis=0) - 1.0)
    for name, arr in (("schedule_box_x", sched.x), ("schedule_box_y", sched.y)):
        flag(name, slots, np.max(np.maximum(-arr, arr - 1.0), axis=0))
    if sched.binary:
        for name, arr in (("schedule_binary_x", sched.x), ("schedule_binary_y", sched.y)):
            flag(name, slots, np.max(np.minimum(np.abs(arr), np.abs(arr - 1.0)), axis=0))
    flag("power_uav_box", slots, np.maximum(-power.p_u, power.p_u - cfg.p_max_uav))
    flag("power_sn_box", slots, np.max(np.maximum(-power.p_s, power.p_s - cfg.p_max_sn), axis=0))

    all_slots = np.arange(0, cfg.N + 1)
    for tag, q, H, ep in (("u", traj.q_u, traj.H_u, cfg.uav_ap), ("b", traj.q_b, traj.H_b, cfg.uav_bs)):
        boundary = [
            (0, float(np.linalg.norm(q[0] - ep.q_i))),
            (0, abs(H[0] - ep.h_i)),
            (cfg.N, float(np.linalg.norm(q[-1] - ep.q_f))),
            (cfg.N, abs(H[-1] - ep.h_f)),
        ]
        for slot, err in boundary:
            if err > tol:
                out.append(Violation(f"boundary_{tag}", slot, err))
        flag(f"speed_xy_{tag}", slots, np.linalg.norm(np.diff(q, axis=0), axis=1) - cfg.step_xy)
        flag(f"speed_z_{tag}", slots, np.abs(np.diff(H)) - cfg.step_z)
        flag(f"altitude_{tag}", all_slots, np.maximum(cfg.h_min - H, H - cfg.h_max))
    flag("collision", all_slots, cfg.d_min**2 - traj.separation_sq())
    return out
