"""Run reports: solution files, per-slot tables, traces and summaries."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rates import assemble_solution, throughput_mbps
from .scenario import PowerAllocation, ScenarioConfig, Schedule, Solution, Trajectory, validate_solution

BCD_TRACE_COLUMNS = ("iteration", "objective", "delta_schedule", "delta_trajectory", "delta_power", "max_residual")
POA_TRACE_COLUMNS = ("slot", "iteration", "vertices", "upper_bound", "lower_bound", "lambda")


class SolutionFileError(ValueError):
    pass


def solution_to_dict(cfg: ScenarioConfig, sol: Solution) -> dict:
    t, s, p = sol.trajectory, sol.schedule, sol.power
    return {
        "scenario_digest": cfg.digest(),
        "objective_value": sol.objective_value,
        "trajectory": {"q_u": t.q_u.tolist(), "H_u": t.H_u.tolist(), "q_b": t.q_b.tolist(), "H_b": t.H_b.tolist()},
        "schedule": {"x": s.x.tolist(), "y": s.y.tolist(), "binary": s.binary},
        "power": {"p_u": p.p_u.tolist(), "p_s": p.p_s.tolist()},
    }


def solution_from_dict(cfg: ScenarioConfig, data: dict, check_objective: bool = True) -> Solution:
    """Rebuild a Solution; the objective is recomputed from its components."""
    try:
        traj = Trajectory(**{k: np.asarray(v, float) for k, v in data["trajectory"].items()})
        sched = Schedule(np.asarray(data["schedule"]["x"], float), np.asarray(data["schedule"]["y"], float),
                         bool(data["schedule"].get("binary", False)))
        power = PowerAllocation(np.asarray(data["power"]["p_u"], float), np.asarray(data["power"]["p_s"], float))
    except (KeyError, TypeError, ValueError) as exc:
        raise SolutionFileError(f"malformed solution record: {exc}") from exc
    sol = assemble_solution(cfg, traj, sched, power)
    stored = data.get("objective_value")
    if check_objective and stored is not None:
        if not np.isclose(sol.objective_value, stored, rtol=1e-9, atol=1e-12):
            raise SolutionFileError(f"stored objective {stored} does not match recomputed {sol.objective_value}")
    return sol


def write_solution(path, cfg, sol):
    Path(path).write_text(json.dumps(solution_to_dict(cfg, sol), indent=1) + "\n", encoding="utf-8")


def read_solution(path, cfg, check_objective: bool = True) -> Solution:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SolutionFileError(f"cannot read solution file {path}: {exc}") from exc
    return solution_from_dict(cfg, data, check_objective)


def slot_table(cfg: ScenarioConfig, sol: Solution):
    """Header and rows of the per-slot table (slots 1..N)."""
    K, L = cfg.K, cfg.L
    header = ["n", "t", "q_bx", "q_by", "H_b", "q_ux", "q_uy", "H_u"]
    header += [f"x_{l + 1}" for l in range(L)] + [f"y_{k + 1}" for k in range(K)]
    header += ["p_u"] + [f"p_s{k + 1}" for k in range(K)] + ["r_u_total", "r_s_total"]
    t, s, p, r = sol.trajectory, sol.schedule, sol.power, sol.rates
    r_u = np.sum(s.x * r.r_u, axis=0)
    r_s = np.sum(s.y * r.r_s, axis=0)
    rows = []
    for n in range(1, cfg.N + 1):
        j = n - 1
        row = [n, n * cfg.slot_delta, *t.q_b[n], t.H_b[n], *t.q_u[n], t.H_u[n]]
        row += list(s.x[:, j]) + list(s.y[:, j]) + [p.p_u[j]] + list(p.p_s[:, j]) + [r_u[j], r_s[j]]
        rows.append([repr(float(v)) if not isinstance(v, (int, np.integer)) else str(v) for v in row])
    return header, rows


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items() if not k.startswith("_")}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return repr(value)


@dataclass
class RunReport:
    """Everything written for one solver run (timing kept apart from the body)."""

    cfg: ScenarioConfig
    solver: str
    options: dict
    solution: Solution
    seed: int | None = None
    wall_time: float = float("nan")
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        sol, d = self.solution, self.solution.diagnostics
        violations = validate_solution(self.cfg, sol)
        return _jsonable({
            "scenario_digest": self.cfg.digest(),
            "solver": self.solver,
            "options": self.options,
            "seed": self.seed,
            "K": self.cfg.K, "L": self.cfg.L, "N": self.cfg.N, "T": self.cfg.period_T,
            "objective": sol.objective_value,
            "throughput_mbit": throughput_mbps(self.cfg, sol.objective_value),
            "uplink_total": sol.rates.uplink_total,
            "downlink_total": sol.rates.downlink_total,
            "diagnostics": {k: v for k, v in d.items() if k not in ("trace", "penalized_power")},
            "violations": [str(v) for v in violations],
            **self.extra,
        })

    def trace_table(self):
        trace = self.solution.diagnostics.get("trace", [])
        cols = POA_TRACE_COLUMNS if self.solution.diagnostics.get("solver") == "poa" else BCD_TRACE_COLUMNS
        return list(cols), [[repr(float(v)) if isinstance(v, float) else str(v) for v in row] for row in trace]

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
        write_csv(out / "slots.csv", *slot_table(self.cfg, self.solution))
        write_csv(out / "trace.csv", *self.trace_table())
        write_solution(out / "solution.json", self.cfg, self.solution)
        (out / "timing.json").write_text(json.dumps({"wall_time_s": self.wall_time}) + "\n", encoding="utf-8")
        return out
