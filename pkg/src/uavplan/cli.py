"""Command-line front end.

Exit codes: 0 success, 2 validation failure, 3 solver did not converge,
4 configuration or input error.  Failures print one JSON record to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import expected_rate_sandwich, sample_rician_power
from .poa import PoaDimensionError, ScheduleRecoveryError, poa_solve
from .rates import throughput_mbps
from .report import RunReport, SolutionFileError, read_solution, write_csv
from .scenario import ScenarioError, ScenarioParseError, db_to_linear, load_scenario_file, validate_solution
from .sca import SCHEMES, BcdOptions, InitializationError, init_straight, run_benchmark_scheme, sca_communication_design

EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGED, EXIT_CONFIG = 0, 2, 3, 4
BUILTIN = ("single_pair", "multi_node", "small_pair")


class CliError(Exception):
    def __init__(self, code: int, message: str, **details):
        super().__init__(message)
        self.code, self.details = code, details


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_CONFIG, message, kind="usage")


def resolve_scenario(name: str):
    """A path, or the name of a bundled scenario."""
    if name in BUILTIN:
        with resources.as_file(resources.files("uavplan.data") / f"{name}.yaml") as p:
            return load_scenario_file(p)
    path = Path(name)
    if not path.is_file():
        raise CliError(EXIT_CONFIG, f"scenario file not found: {name}", kind="missing_file")
    return load_scenario_file(path)


def _bcd_options(args) -> BcdOptions:
    return BcdOptions(eps=args.eps, max_outer=args.max_iters)


def _solve_one(cfg, scheme: str, args):
    start = time.perf_counter()
    if scheme == "poa":
        sol = poa_solve(cfg, init_straight(cfg), eps=args.eps, max_iters=args.poa_iters, mode=args.poa_mode)
        converged = bool(sol.diagnostics["certified"])
        options = {"eps": args.eps, "max_iters": args.poa_iters, "mode": args.poa_mode, "trajectory": "straight"}
    else:
        sol = run_benchmark_scheme(cfg, scheme, _bcd_options(args))
        converged = bool(sol.diagnostics["converged"])
        options = {"eps": args.eps, "max_outer": args.max_iters, "scheme": scheme}
    return sol, converged, options, time.perf_counter() - start


def cmd_solve(args) -> int:
    cfg = resolve_scenario(args.scenario)
    sol, converged, options, wall = _solve_one(cfg, args.scheme, args)
    report = RunReport(cfg, "poa" if args.scheme == "poa" else "bcd", options, sol, args.seed, wall)
    out = report.write(args.out_dir)
    print(f"{args.scheme}: objective {sol.objective_value:.6f} ({throughput_mbps(cfg, sol.objective_value):.3f} Mbit) -> {out}")
    if validate_solution(cfg, sol):
        return EXIT_VALIDATION
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_sweep(args) -> int:
    base = resolve_scenario(args.scenario)
    periods = [float(v) for v in args.T_list.split(",") if v.strip()]
    if not periods:
        raise CliError(EXIT_CONFIG, "empty --T-list")
    schemes = list(SCHEMES)
    header = ["T", "N"] + [f"{s} [objective]" for s in schemes] + [f"{s} [Mbit]" for s in schemes]
    rows, code = [], EXIT_OK
    out = Path(args.out_dir)
    for T in periods:
        cfg = base.with_period(T)
        objs = []
        for scheme in schemes:
            sol, converged, options, wall = _solve_one(cfg, scheme, args)
            RunReport(cfg, "bcd", options, sol, args.seed, wall).write(out / f"T{T:g}" / scheme.replace(" ", "_").replace("&", "and"))
            if validate_solution(cfg, sol):
                code = EXIT_VALIDATION
            elif not converged and code == EXIT_OK:
                code = EXIT_NONCONVERGED
            objs.append(sol.objective_value)
        rows.append([repr(T), str(cfg.N)] + [repr(v) for v in objs] + [repr(throughput_mbps(cfg, v)) for v in objs])
        print(f"T={T:g}: " + ", ".join(f"{s}={v:.3f}" for s, v in zip(schemes, objs)))
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", header, rows)
    return code


def cmd_validate_theorem1(args) -> int:
    if args.samples < 2:
        raise CliError(EXIT_CONFIG, "--samples must be >= 2")
    K = db_to_linear(args.K_db)
    snr, inr = db_to_linear(args.snr_db), db_to_linear(args.inr_db)
    x = snr * sample_rician_power(K, args.seed, args.samples)
    y = inr * sample_rician_power(K, args.seed + 1, args.samples) + 1.0
    rep = expected_rate_sandwich(x, y)
    record = {"K_db": args.K_db, "snr_db": args.snr_db, "inr_db": args.inr_db, "seed": args.seed, **rep.as_dict(),
              "approx_within_bounds": rep.approx_within_bounds(), "empirical_within_bounds": rep.empirical_within_bounds()}
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sandwich.json").write_text(json.dumps(record, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"lower {rep.lower:.6f} <= approx {rep.approx:.6f} <= upper {rep.upper:.6f}; empirical {rep.empirical:.6f}")
    return EXIT_OK if rep.approx_within_bounds() else EXIT_VALIDATION


def cmd_compare(args) -> int:
    cfg = resolve_scenario(args.scenario)
    traj = init_straight(cfg)
    t0 = time.perf_counter()
    sca = sca_communication_design(cfg, traj, _bcd_options(args))
    t1 = time.perf_counter()
    poa = poa_solve(cfg, traj, eps=args.eps, max_iters=args.poa_iters, mode=args.poa_mode)
    t2 = time.perf_counter()
    d = poa.diagnostics
    record = {
        "scenario_digest": cfg.digest(),
        "sca_objective": sca.objective_value,
        "poa_objective": poa.objective_value,
        "poa_lower_bound": d["lower_bound"],
        "poa_upper_bound": d["upper_bound"],
        "poa_certified": d["certified"],
        "relative_gap": (poa.objective_value - sca.objective_value) / poa.objective_value if poa.objective_value else 0.0,
    }
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(json.dumps(record, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out / "timing.json").write_text(json.dumps({"sca_s": t1 - t0, "poa_s": t2 - t1}) + "\n", encoding="utf-8")
    print(f"sca {sca.objective_value:.6f}  poa {poa.objective_value:.6f}  (upper bound {d['upper_bound']:.6f})")
    return EXIT_OK if d["certified"] else EXIT_NONCONVERGED


def cmd_check(args) -> int:
    cfg = resolve_scenario(args.scenario)
    sol = read_solution(args.solution, cfg, check_objective=False)
    violations = validate_solution(cfg, sol, tol=args.tol)
    for v in violations:
        print(v)
    if violations:
        raise CliError(EXIT_VALIDATION, f"{len(violations)} constraint violations", kind="validation",
                       violations=[str(v) for v in violations])
    print(f"solution feasible; objective {sol.objective_value:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="uavplan", description="Dual-UAV trajectory and communication planning.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, scenario_default=None):
        sp.add_argument("--scenario", default=scenario_default, required=scenario_default is None,
                        help=f"scenario file or bundled name ({', '.join(BUILTIN)})")
        sp.add_argument("--eps", type=float, default=1e-2)
        sp.add_argument("--max-iters", type=int, default=25, help="outer iterations of the alternating solver")
        sp.add_argument("--poa-iters", type=int, default=100_000, help="polyblock iterations")
        sp.add_argument("--poa-mode", choices=("auto", "joint", "by-slot"), default="auto")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out-dir", default="out")

    sp = sub.add_parser("solve", help="run one scheme")
    common(sp)
    sp.add_argument("--scheme", default=SCHEMES[0], choices=list(SCHEMES) + ["poa"])
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="all schemes over several periods")
    common(sp)
    sp.add_argument("--T-list", default="20,40")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate-theorem1", help="sampled check of the expected-rate approximation")
    sp.add_argument("--K-db", type=float, default=3.0)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--snr-db", type=float, default=10.0)
    sp.add_argument("--inr-db", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default="out")
    sp.set_defaults(func=cmd_validate_theorem1)

    sp = sub.add_parser("compare-poa-sca", help="global vs local communication design on a fixed trajectory")
    common(sp, scenario_default="small_pair")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("check", help="validate a solution file")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--solution", required=True)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.set_defaults(func=cmd_check)
    return p


def _error_record(code: int, kind: str, message: str, **details) -> str:
    return json.dumps({"error": kind, "message": message, "exit_code": code, **details}, sort_keys=True)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(_error_record(exc.code, exc.details.pop("kind", "error"), str(exc), **exc.details), file=sys.stderr)
        return exc.code
    except (ScenarioError, ScenarioParseError, SolutionFileError, InitializationError, PoaDimensionError) as exc:
        print(_error_record(EXIT_CONFIG, type(exc).__name__, str(exc)), file=sys.stderr)
        return EXIT_CONFIG
    except ScheduleRecoveryError as exc:
        print(_error_record(EXIT_NONCONVERGED, type(exc).__name__, str(exc)), file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
