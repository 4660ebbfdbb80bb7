"""Optimization primitives: linear feasibility, linear programs, concave maximization.

Variables are expected to be pre-scaled to O(1) by the caller.  Every point
handed back is re-checked against its constraints, independently of what the
backend solver reports.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog, minimize

log = logging.getLogger(__name__)

WITNESS_TOL = 1e-9
FEASIBILITY_TOL = 1e-8


class InfeasibleStartError(ValueError):
    """The starting point handed to a local solver is not feasible."""


# ---------------------------------------------------------------------------
# Linear feasibility


@dataclass(frozen=True)
class LinearFeasibilityProblem:
    """Rows ``A z (sense) b`` plus finite box bounds on every variable.

    Rows are normalised to unit infinity-norm at construction, so the witness
    tolerance is relative to each row's largest coefficient.
    """

    lower: np.ndarray
    upper: np.ndarray
    A: np.ndarray
    b: np.ndarray
    sense: tuple  # one of "<=", ">=", "=" per row

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        A = np.asarray(self.A, dtype=float).reshape(-1, lower.size)
        b = np.asarray(self.b, dtype=float).ravel()
        sense = tuple(self.sense)
        if upper.size != lower.size:
            raise ValueError("lower and upper bounds differ in length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("unbounded variables are not supported")
        if np.any(lower > upper):
            raise ValueError("box bounds with lower > upper")
        if A.shape[0] != b.size or len(sense) != b.size:
            raise ValueError("row data have inconsistent lengths")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("row coefficients must be finite")
        if any(s not in ("<=", ">=", "=") for s in sense):
            raise ValueError(f"unknown row sense in {sense}")
        scale = np.max(np.abs(A), axis=1, initial=0.0)
        scale = np.where(scale > 0, scale, np.maximum(np.abs(b), 1.0))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "A", A / scale[:, None])
        object.__setattr__(self, "b", b / scale)
        object.__setattr__(self, "sense", sense)

    @property
    def n(self) -> int:
        return self.lower.size

    def violation(self, z: np.ndarray) -> float:
        """Largest violation of any row or bound at ``z``."""
        lhs = self.A @ z
        worst = 0.0
        sense = np.array(self.sense)
        if lhs.size:
            le = sense == "<="
            ge = sense == ">="
            eq = sense == "="
            worst = max(
                float(np.max(lhs[le] - self.b[le], initial=0.0)),
                float(np.max(self.b[ge] - lhs[ge], initial=0.0)),
                float(np.max(np.abs(lhs[eq] - self.b[eq]), initial=0.0)),
            )
        box = max(float(np.max(self.lower - z, initial=0.0)), float(np.max(z - self.upper, initial=0.0)))
        return max(worst, box)


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    witness: np.ndarray | None
    max_violation: float = float("nan")


def check_linear_feasibility(prob: LinearFeasibilityProblem, cost: np.ndarray | None = None) -> FeasibilityResult:
    """Decide whether the rows and boxes admit a point.

    With ``cost`` the witness is the feasible point minimising ``cost @ z``
    (for example the least-power point of an SINR system).
    """
    sense = np.array(prob.sense)
    le, ge, eq = sense == "<=", sense == ">=", sense == "="
    A_ub = np.vstack([prob.A[le], -prob.A[ge]])
    b_ub = np.concatenate([prob.b[le], -prob.b[ge]])
    c = np.zeros(prob.n) if cost is None else np.asarray(cost, dtype=float)
    res = linprog(
        c,
        A_ub=A_ub if A_ub.size else None,
        b_ub=b_ub if A_ub.size else None,
        A_eq=prob.A[eq] if np.any(eq) else None,
        b_eq=prob.b[eq] if np.any(eq) else None,
        bounds=np.column_stack([prob.lower, prob.upper]),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0 or res.x is None:
        return FeasibilityResult(False, None)
    z = np.clip(res.x, prob.lower, prob.upper)
    viol = prob.violation(z)
    if viol > WITNESS_TOL:
        log.debug("linprog witness violates rows by %.3g; reporting infeasible", viol)
        return FeasibilityResult(False, None, viol)
    return FeasibilityResult(True, z, viol)


def solve_linear_program(c, A_ub, b_ub, lower, upper, maximize: bool = True) -> np.ndarray:
    """Optimal vertex of ``max/min c z`` over ``A_ub z <= b_ub`` and boxes."""
    c = np.asarray(c, dtype=float)
    sign = -1.0 if maximize else 1.0
    res = linprog(
        sign * c,
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=np.column_stack([np.broadcast_to(lower, c.shape), np.broadcast_to(upper, c.shape)]),
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    return np.clip(res.x, lower, upper)


# ---------------------------------------------------------------------------
# Smooth concave maximization


@dataclass
class SmoothConvexProgram:
    """Maximise a smooth concave objective over boxes, linear and quadratic rows.

    Linear rows read ``A_ineq z <= b_ineq``; each quadratic row ``(A, b, c)``
    reads ``||A z + b||^2 <= c``.
    """

    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    A_ineq: np.ndarray | None = None
    b_ineq: np.ndarray | None = None
    quadratic: Sequence[tuple] = field(default_factory=list)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def box_only(self) -> bool:
        return (self.A_ineq is None or len(self.A_ineq) == 0) and not self.quadratic

    def violation(self, z) -> float:
        worst = max(float(np.max(self.lower - z, initial=0.0)), float(np.max(z - self.upper, initial=0.0)))
        if self.A_ineq is not None and len(self.A_ineq):
            worst = max(worst, float(np.max(self.A_ineq @ z - self.b_ineq, initial=0.0)))
        for A, b, c in self.quadratic:
            r = A @ z + b
            worst = max(worst, float(r @ r - c))
        return worst


@dataclass(frozen=True)
class ConcaveResult:
    point: np.ndarray
    value: float
    converged: bool
    iterations: int
    kkt_residual: float
    message: str = ""


def _projected_gradient_residual(prog: SmoothConvexProgram, z: np.ndarray) -> float:
    g = prog.gradient(z)
    step = np.clip(z + g, prog.lower, prog.upper) - z
    return float(np.max(np.abs(step), initial=0.0))


def maximize_concave(prog: SmoothConvexProgram, start, tol: float = 1e-6, max_iter: int = 1000) -> ConcaveResult:
    """Local (hence global) maximiser of a concave program from a feasible start.

    Box-only programs use L-BFGS-B; programs with rows use SLSQP.  The result
    is never worse than ``start`` and never infeasible beyond 1e-8.
    """
    z0 = np.asarray(start, dtype=float).copy()
    if z0.size != prog.n:
        raise ValueError("start point has the wrong dimension")
    if prog.violation(z0) > FEASIBILITY_TOL:
        raise InfeasibleStartError(f"start violates constraints by {prog.violation(z0):.3g}")
    f0 = float(prog.objective(z0))

    neg_f = lambda z: -float(prog.objective(z))
    neg_g = lambda z: -np.asarray(prog.gradient(z), dtype=float)
    bounds = list(zip(prog.lower, prog.upper))

    if prog.box_only:
        res = minimize(
            neg_f, z0, jac=neg_g, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": max_iter, "ftol": 1e-15, "gtol": tol * 1e-3, "maxcor": 30},
        )
    else:
        cons = []
        if prog.A_ineq is not None and len(prog.A_ineq):
            A, b = np.asarray(prog.A_ineq, float), np.asarray(prog.b_ineq, float)
            cons.append({"type": "ineq", "fun": lambda z, A=A, b=b: b - A @ z, "jac": lambda z, A=A: -A})
        for A, b, c in prog.quadratic:
            A, b = np.asarray(A, float), np.asarray(b, float)
            cons.append({
                "type": "ineq",
                "fun": lambda z, A=A, b=b, c=c: np.atleast_1d(c - np.sum((A @ z + b) ** 2)),
                "jac": lambda z, A=A, b=b: np.atleast_2d(-2.0 * (A @ z + b) @ A),
            })
        res = minimize(
            neg_f, z0, jac=neg_g, method="SLSQP", bounds=bounds, constraints=cons,
            options={"maxiter": max_iter, "ftol": tol * 1e-3},
        )

    z = np.clip(res.x, prog.lower, prog.upper)
    value = float(prog.objective(z))
    feasible = prog.violation(z) <= FEASIBILITY_TOL
    if not feasible or value < f0:
        # Solver drifted: keep the start (ascent and feasibility guarantees).
        z, value = z0, f0
    kkt = _projected_gradient_residual(prog, z) if prog.box_only else float("nan")
    converged = bool(res.success) or (prog.box_only and kkt <= tol)
    if not converged:
        log.warning("maximize_concave stopped early: %s", res.message)
    return ConcaveResult(z, value, converged, int(getattr(res, "nit", 0)), kkt, str(res.message))


# ---------------------------------------------------------------------------
# Conic models


def solve_conic(problem, solvers: Sequence[str] = ("CLARABEL", "SCS")) -> str:
    """Solve a cvxpy problem, falling back through ``solvers``; returns the status."""
    import cvxpy as cp

    status = "not_run"
    for name in solvers:
        if name not in cp.installed_solvers():
            continue
        try:
            problem.solve(solver=name)
        except cp.SolverError as exc:
            log.debug("solver %s failed: %s", name, exc)
            status = "solver_error"
            continue
        status = problem.status
        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return status
    return status
