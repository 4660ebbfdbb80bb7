import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uavplan.channel import ExpectedGains
from uavplan.kernel import (
    InfeasibleStartError,
    LinearFeasibilityProblem,
    SmoothConvexProgram,
    check_linear_feasibility,
    maximize_concave,
)
from uavplan.poa import slot_feasibility

from uavplan.scenario import Endpoints

from conftest import make_config


def _box_problem(row_rhs):
    return LinearFeasibilityProblem([0.0], [0.1], [[1.0]], [row_rhs], (">=",))


def test_single_variable_feasible():
    res = check_linear_feasibility(_box_problem(0.05))
    assert res.feasible
    assert 0.05 - 1e-9 <= res.witness[0] <= 0.1


def test_single_variable_infeasible():
    res = check_linear_feasibility(_box_problem(0.2))
    assert not res.feasible and res.witness is None


def test_malformed_problems_rejected():
    with pytest.raises(ValueError):
        LinearFeasibilityProblem([0.0], [np.inf], [[1.0]], [0.0], (">=",))
    with pytest.raises(ValueError):
        LinearFeasibilityProblem([1.0], [0.0], [[1.0]], [0.0], (">=",))
    with pytest.raises(ValueError):
        LinearFeasibilityProblem([0.0], [1.0], [[np.nan]], [0.0], (">=",))


def _one_by_one(f=1e-11, hg=1e-12):
    cfg = make_config(sns=[[0, 0]], aps=[[500, 0]], T=0.5, N=1, uav_bs=Endpoints([0, 0], [0, 0], 300, 300),
                      uav_ap=Endpoints([500, 0], [500, 0], 300, 300))
    gains = ExpectedGains(np.array([[1e-10]]), np.array([[2e-10]]), np.array([f]), np.array([[hg]]))
    return cfg, gains


def _grid_feasible(cfg, gains, chi, chi_bar, step=1e-4):
    """Brute force: which (p_s, p_u) grid points meet both SINR targets."""
    ps = np.arange(0, cfg.p_max_sn + step / 2, step)
    pu = np.arange(0, cfg.p_max_uav + step / 2, step)
    PS, PU = np.meshgrid(ps, pu, indexing="ij")
    s2 = cfg.noise_power
    up = gains.h[0, 0] * PS >= chi * (gains.f[0] * PU + s2) * (1 - 1e-12)
    down = gains.g[0, 0] * PU >= chi_bar * (gains.h_g2g[0, 0] * PS + s2) * (1 - 1e-12)
    return PS[up & down], PU[up & down]


def test_sinr_system_at_full_power_target():
    cfg, gains = _one_by_one()
    chi = gains.h[0, 0] * cfg.p_max_sn / cfg.noise_power
    ok, p_s, p_u = slot_feasibility(gains, cfg, 0, np.array([chi]), np.array([0.0]))
    assert ok
    assert p_s[0] == pytest.approx(cfg.p_max_sn, rel=1e-9)
    assert p_u[0] == 0.0
    # Oracle: the only grid point meeting the target.
    gs, gu = _grid_feasible(cfg, gains, chi, 0.0)
    assert gs.size == 1 and gs[0] == pytest.approx(cfg.p_max_sn) and gu[0] == 0.0
    ok, *_ = slot_feasibility(gains, cfg, 0, np.array([chi * 1.001]), np.array([0.0]))
    assert not ok


def test_sinr_witness_is_least_power_point():
    cfg, gains = _one_by_one(f=1e-13, hg=1e-14)
    chi, chi_bar = 300.0, 500.0
    ok, p_s, p_u = slot_feasibility(gains, cfg, 0, np.array([chi]), np.array([chi_bar]))
    assert ok
    # Closed form: both constraints tight, p = (I - D F)^-1 D sigma^2.
    s2 = cfg.noise_power
    D = np.diag([chi / gains.h[0, 0], chi_bar / gains.g[0, 0]])
    F = np.array([[0.0, gains.f[0]], [gains.h_g2g[0, 0], 0.0]])
    p = np.linalg.solve(np.eye(2) - D @ F, D @ np.full(2, s2))
    np.testing.assert_allclose([p_s[0], p_u[0]], p, rtol=1e-7)
    gs, gu = _grid_feasible(cfg, gains, chi, chi_bar)
    assert gs.min() >= p[0] - 1e-12 and gu.min() >= p[1] - 1e-12


@settings(max_examples=40, deadline=None)
@given(
    chi=st.floats(0.0, 2000.0),
    chi_bar=st.floats(0.0, 4000.0),
    lam1=st.floats(0.0, 1.0),
    lam2=st.floats(0.0, 1.0),
    f=st.floats(1e-13, 1e-9),
)
def test_sinr_feasibility_monotone_in_scale(chi, chi_bar, lam1, lam2, f):
    cfg, gains = _one_by_one(f=f)
    lo, hi = sorted((lam1, lam2))
    ok_hi, *_ = slot_feasibility(gains, cfg, 0, np.array([hi * chi]), np.array([hi * chi_bar]))
    ok_lo, *_ = slot_feasibility(gains, cfg, 0, np.array([lo * chi]), np.array([lo * chi_bar]))
    if ok_hi:
        assert ok_lo


def test_maximize_concave_interior():
    prog = SmoothConvexProgram(lambda z: -(z[0] - 3) ** 2, lambda z: np.array([-2 * (z[0] - 3)]), [0.0], [10.0])
    res = maximize_concave(prog, [1.0], tol=1e-8)
    assert res.point[0] == pytest.approx(3.0, abs=1e-6)
    assert res.value == pytest.approx(0.0, abs=1e-10)


def test_maximize_concave_active_bound():
    prog = SmoothConvexProgram(lambda z: np.log2(1 + z[0]), lambda z: np.array([1 / ((1 + z[0]) * np.log(2))]), [0.0], [0.1])
    res = maximize_concave(prog, [0.0])
    assert res.point[0] == pytest.approx(0.1, abs=1e-12)


def test_maximize_concave_with_rows():
    # max -(x-2)^2 - (y-2)^2 s.t. x + y <= 2 and x^2 + y^2 <= 1.5 -> (sqrt(.75), sqrt(.75))
    prog = SmoothConvexProgram(
        lambda z: -np.sum((z - 2) ** 2), lambda z: -2 * (z - 2), [0, 0], [5, 5],
        A_ineq=np.array([[1.0, 1.0]]), b_ineq=np.array([2.0]),
        quadratic=[(np.eye(2), np.zeros(2), 1.5)],
    )
    res = maximize_concave(prog, [0.1, 0.1], tol=1e-9)
    np.testing.assert_allclose(res.point, [np.sqrt(0.75)] * 2, atol=1e-5)
    assert prog.violation(res.point) <= 1e-8


def test_maximize_concave_rejects_infeasible_start():
    prog = SmoothConvexProgram(lambda z: -z[0] ** 2, lambda z: -2 * z, [0.0], [1.0])
    with pytest.raises(InfeasibleStartError):
        maximize_concave(prog, [2.0])


@settings(max_examples=30, deadline=None)
@given(c=st.lists(st.floats(-3, 3), min_size=3, max_size=3), start=st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_maximize_concave_ascent_and_feasibility(c, start):
    c = np.array(c)
    prog = SmoothConvexProgram(lambda z: float(np.sum(np.log1p(z)) - np.sum((z - c) ** 2)),
                               lambda z: 1 / (1 + z) - 2 * (z - c), np.zeros(3), np.ones(3))
    z0 = np.array(start)
    res = maximize_concave(prog, z0)
    assert prog.violation(res.point) <= 1e-8
    assert res.value >= prog.objective(z0) - 1e-12
