import numpy as np
import pytest

from uavplan.channel import ExpectedGains, expected_gains
from uavplan.rates import assemble_solution, rate_breakdown
from uavplan.scenario import Endpoints, PowerAllocation, Schedule, Trajectory, validate_solution
from uavplan.sca import (
    BcdOptions,
    SCHEMES,
    init_circular,
    init_straight,
    linearize_power,
    linearize_trajectory,
    round_schedule,
    run_bcd,
    run_benchmark_scheme,
    scheduling_surrogate,
    solve_power_block,
    solve_scheduling_block,
    solve_trajectory_block,
)
from uavplan.sca.init import separate_altitudes

from conftest import hover_trajectory, make_config, make_small_pair
from generators import random_power, random_schedule, random_trajectories
from oracles import best_binary_schedule, slot_power_grid


# -- initialization ---------------------------------------------------------


def test_single_node_circles_have_nominal_radius():
    T = 40.0
    r = 50.0 * T / (2 * np.pi)
    cfg = make_config(sns=[[0, 0]], aps=[[2000, 0]], T=T, N=80,
                      uav_bs=Endpoints([r, 0], [r, 0], 300, 300),
                      uav_ap=Endpoints([2000 + r, 0], [2000 + r, 0], 300, 300))
    traj, sched, power, info = init_circular(cfg)
    assert info["radius_bs"] == pytest.approx(r, rel=1e-9)
    assert info["radius_ap"] == pytest.approx(r, rel=1e-9)
    np.testing.assert_allclose(np.linalg.norm(traj.q_b, axis=1), r, rtol=1e-9)
    np.testing.assert_allclose(np.linalg.norm(traj.q_u - [2000, 0], axis=1), r, rtol=1e-9)
    np.testing.assert_allclose(sched.y, 1.0)
    np.testing.assert_allclose(power.p_u, cfg.p_max_uav)


def test_short_period_shrinks_circle_and_stays_feasible():
    cfg = make_config(T=12.0, N=24, uav_bs=Endpoints([200, 700], [800, 700], 600, 600),
                      uav_ap=Endpoints([200, 300], [800, 300], 500, 500))
    traj, sched, power, info = init_circular(cfg)
    assert info["radius_bs"] < info["nominal_radius"]
    assert not validate_solution(cfg, assemble_solution(cfg, traj, sched, power), tol=1e-9)


def test_identical_paths_split_altitudes_symmetrically(short_cfg):
    cfg = short_cfg
    q = np.zeros((21, 2))
    H = np.full(21, 300.0)
    H_u, H_b = separate_altitudes(cfg, q, H, q, H)
    np.testing.assert_allclose(H_u - 300.0, 300.0 - H_b)
    assert np.all(H_u - H_b >= 10.0)
    np.testing.assert_allclose(H_u, 300.0 + 5.0, atol=1e-3)


def test_identical_centroids_initialize_feasibly():
    r = 50 * 40 / (2 * np.pi)
    cfg = make_config(sns=[[50, 0], [-50, 0]], aps=[[0, 50], [0, -50]],
                      uav_bs=Endpoints([r + 20, 0], [r + 20, 0], 300, 300),
                      uav_ap=Endpoints([r - 20, 0], [r - 20, 0], 300, 300))
    traj, sched, power, _ = init_circular(cfg)
    assert np.min(traj.separation_sq()) >= cfg.d_min**2
    assert np.max(np.abs(traj.H_u - traj.H_b)) > 0


def test_straight_initialization(single_pair_cfg):
    traj = init_straight(single_pair_cfg)
    np.testing.assert_allclose(np.diff(traj.q_b, axis=0), [[12.5, 0.0]] * 80)


# -- rounding -----------------------------------------------------------------


def test_round_schedule_examples():
    s = round_schedule(Schedule(x=[[0.04], [0.04]], y=[[0.7], [0.3]]))
    np.testing.assert_array_equal(s.y, [[1.0], [0.0]])
    np.testing.assert_array_equal(s.x, [[0.0], [0.0]])
    binary = Schedule(x=[[1.0, 0.0], [0.0, 0.0]], y=[[0.0, 1.0]])
    again = round_schedule(binary)
    np.testing.assert_array_equal(again.x, binary.x)
    np.testing.assert_array_equal(again.y, binary.y)
    assert again.binary


# -- scheduling block -----------------------------------------------------------


def test_scheduling_block_reaches_exhaustive_optimum():
    cfg = make_small_pair(N=4)
    gains = expected_gains(cfg, init_straight(cfg))
    for power in (PowerAllocation.full(cfg), random_power(np.random.default_rng(3), cfg)):
        best, _ = best_binary_schedule(cfg, gains, power)
        s = Schedule.uniform(cfg.K, cfg.L, cfg.N)
        for _ in range(5):
            s = solve_scheduling_block(cfg, gains, power, s)
        val = rate_breakdown(cfg, gains, s, power).objective
        # The relaxed objective is convex in y and linear in x, so its maximum
        # sits at a binary schedule: the enumeration is an upper bound.
        assert val <= best + 1e-9
        assert val == pytest.approx(best, rel=1e-6)


def test_scheduling_without_downlink_weight_schedules_every_slot():
    cfg = make_config(T=10.0, N=20, weight_beta2=0.0, uav_bs=Endpoints([300, 700], [700, 700], 600, 600),
                      uav_ap=Endpoints([300, 300], [700, 300], 500, 500))
    traj = init_straight(cfg)
    gains = expected_gains(cfg, traj)
    s = solve_scheduling_block(cfg, gains, PowerAllocation.full(cfg), Schedule.uniform(1, 1, cfg.N))
    np.testing.assert_allclose(s.y, 1.0)


def test_scheduling_with_silent_sns_ignores_downlink():
    cfg = make_small_pair(N=3)
    gains = expected_gains(cfg, init_straight(cfg))
    power = PowerAllocation(np.full(3, 0.1), np.zeros((2, 3)))
    s = solve_scheduling_block(cfg, gains, power, Schedule.uniform(2, 2, 3))
    # The downlink slopes vanish, and the uplink terms are zero too: the x part
    # still picks the better AP per slot.
    assert np.all(s.x.sum(axis=0) == pytest.approx(1.0))
    r = rate_breakdown(cfg, gains, s, power)
    assert r.objective == pytest.approx(cfg.weight_beta2 * np.sum(np.max(r.r_u, axis=0)), rel=1e-9)


def test_scheduling_surrogate_tight_and_below():
    rng = np.random.default_rng(0)
    cfg = make_small_pair(N=4)
    gains = expected_gains(cfg, init_straight(cfg))
    power = random_power(rng, cfg)
    ref = random_schedule(rng, 2, 2, 4)
    true_ref = rate_breakdown(cfg, gains, ref, power).objective
    assert scheduling_surrogate(cfg, gains, power, ref, ref) == pytest.approx(true_ref, rel=1e-12)
    for _ in range(50):
        s = random_schedule(rng, 2, 2, 4)
        assert scheduling_surrogate(cfg, gains, power, ref, s) <= rate_breakdown(cfg, gains, s, power).objective + 1e-12


# -- power block ---------------------------------------------------------------


def test_power_block_uncoupled_goes_to_full_power(single_pair_cfg):
    cfg = single_pair_cfg
    N = 3
    gains = ExpectedGains(np.full((1, N), 1e-10), np.full((1, N), 1e-10), np.zeros(N), np.zeros((1, 1)))
    sched = Schedule(np.ones((1, N)), np.ones((1, N)))
    p = solve_power_block(cfg, gains, sched, PowerAllocation(np.full(N, 0.01), np.full((1, N), 0.01)))
    np.testing.assert_allclose(p.p_u, 0.1, rtol=1e-9)
    np.testing.assert_allclose(p.p_s, 0.1, rtol=1e-9)


def _pair_instance(sep, beta2):
    cfg = make_config(sns=[[0, 120]], aps=[[sep, -120]], T=0.5, N=1, uav_bs=Endpoints([0, 60], [0, 60], 200, 200),
                      uav_ap=Endpoints([sep, -60], [sep, -60], 150, 150), weight_beta2=beta2)
    return cfg, hover_trajectory(cfg, [0, 60], 200, [sep, -60], 150)


@pytest.mark.parametrize("sep,beta2", [(100, 1.0), (100, 1 / 3), (400, 1 / 3)])
def test_power_block_matches_grid(sep, beta2):
    cfg, traj = _pair_instance(sep, beta2)
    gains = expected_gains(cfg, traj)
    sched = Schedule([[1.0]], [[1.0]])
    p = PowerAllocation.full(cfg)
    for _ in range(50):
        p = solve_power_block(cfg, gains, sched, p)
    val = rate_breakdown(cfg, gains, sched, p).objective
    grid, grid_err, fine = slot_power_grid(cfg, gains, 0)
    assert val >= grid - grid_err - 1e-6
    assert val <= fine + grid_err + 1e-6


def test_power_block_ascends_from_grid_optimum():
    cfg, traj = _pair_instance(400, 1 / 3)
    gains = expected_gains(cfg, traj)
    sched = Schedule([[1.0]], [[1.0]])
    ps = np.linspace(0, 0.1, 101)
    vals = [[rate_breakdown(cfg, gains, sched, PowerAllocation([b], [[a]])).objective for b in ps] for a in ps]
    i, j = np.unravel_index(np.argmax(vals), (101, 101))
    start = PowerAllocation([ps[j]], [[ps[i]]])
    p = solve_power_block(cfg, gains, sched, start)
    assert rate_breakdown(cfg, gains, sched, p).objective >= np.max(vals) - 1e-9


def test_power_surrogate_tight_and_below():
    rng = np.random.default_rng(1)
    cfg = make_small_pair(N=4)
    gains = expected_gains(cfg, init_straight(cfg))
    sched = random_schedule(rng, 2, 2, 4)
    ref = random_power(rng, cfg)
    lin = linearize_power(cfg, gains, sched, ref)
    pack = lambda p: lin.pack(p.p_u / cfg.p_max_uav, p.p_s / cfg.p_max_sn)
    assert lin.value(pack(ref)) == pytest.approx(rate_breakdown(cfg, gains, sched, ref).objective, rel=1e-12)
    for _ in range(50):
        p = random_power(rng, cfg)
        assert lin.value(pack(p)) <= rate_breakdown(cfg, gains, sched, p).objective + 1e-12


def test_power_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    cfg = make_small_pair(N=2)
    gains = expected_gains(cfg, init_straight(cfg))
    lin = linearize_power(cfg, gains, random_schedule(rng, 2, 2, 2), random_power(rng, cfg))
    z = rng.uniform(0.1, 0.9, 6)
    num = np.array([(lin.value(z + 1e-7 * e) - lin.value(z - 1e-7 * e)) / 2e-7 for e in np.eye(6)])
    np.testing.assert_allclose(lin.gradient(z), num, rtol=1e-5, atol=1e-6)


# -- trajectory block ------------------------------------------------------------


def test_trajectory_surrogate_tight_at_expansion(single_pair_cfg):
    cfg = single_pair_cfg
    rng = np.random.default_rng(4)
    traj, *_ = init_circular(cfg)
    sched, power = random_schedule(rng, 1, 1, cfg.N), random_power(rng, cfg)
    true = rate_breakdown(cfg, expected_gains(cfg, traj), sched, power).objective
    for scale in (1.0, 100.0):
        lin = linearize_trajectory(cfg, sched, power, traj, scale=scale)
        assert lin.value(traj, cfg.sn_positions, cfg.ap_positions) == pytest.approx(true, rel=1e-9)
        np.testing.assert_allclose(lin.psi(traj) * scale**2, traj.separation_sq()[1:], rtol=1e-12)
        assert np.all(lin.omega1 >= 0) and np.all(lin.omega2 >= 0) and np.all(lin.S2 >= 0)


def test_trajectory_surrogate_below_true(single_pair_cfg):
    cfg = single_pair_cfg
    rng = np.random.default_rng(5)
    ref, *_ = init_circular(cfg)
    sched, power = random_schedule(rng, 1, 1, cfg.N), random_power(rng, cfg)
    lin = linearize_trajectory(cfg, sched, power, ref, scale=100.0)
    for traj in random_trajectories(rng, cfg, 20):
        true = rate_breakdown(cfg, expected_gains(cfg, traj), sched, power).objective
        assert lin.value(traj, cfg.sn_positions, cfg.ap_positions) <= true + 1e-9 * abs(true)
        # Any smaller slack lowers the surrogate further.
        ups = 0.5 * lin.psi(traj) * 100.0**2
        assert lin.value(traj, cfg.sn_positions, cfg.ap_positions, ups) <= true + 1e-9 * abs(true)


def test_hover_above_sn_is_a_fixed_point():
    cfg = make_config(sns=[[0, 0]], aps=[[600, 0]], T=3.0, N=6, weight_beta2=0.0,
                      uav_bs=Endpoints([0, 0], [0, 0], 100, 100), uav_ap=Endpoints([600, 0], [600, 0], 300, 300))
    traj = hover_trajectory(cfg, [0, 0], 100, [600, 0], 300)
    sched = Schedule(np.zeros((1, 6)), np.ones((1, 6)))
    power = PowerAllocation(np.zeros(6), np.full((1, 6), 0.1))
    out = solve_trajectory_block(cfg, sched, power, traj)
    np.testing.assert_allclose(out.q_b, traj.q_b, atol=1e-3)
    np.testing.assert_allclose(out.H_b, traj.H_b, atol=1e-3)


def test_trajectory_block_moves_bs_towards_sn():
    cfg = make_config(sns=[[0, 150]], aps=[[400, -150]], T=12.0, N=6, weight_beta2=1 / 3,
                      uav_bs=Endpoints([-150, 0], [150, 0], 300, 300), uav_ap=Endpoints([250, 0], [550, 0], 250, 250))
    traj = init_straight(cfg)
    sched, power = Schedule.uniform(1, 1, 6), PowerAllocation.full(cfg)
    mean_dist = lambda t: np.mean(np.sqrt(np.sum((t.q_b[1:] - [0, 150]) ** 2, axis=1) + t.H_b[1:] ** 2))
    before = mean_dist(traj)
    obj = rate_breakdown(cfg, expected_gains(cfg, traj), sched, power).objective
    for _ in range(3):
        cand = solve_trajectory_block(cfg, sched, power, traj)
        new = rate_breakdown(cfg, expected_gains(cfg, cand), sched, power).objective
        assert new >= obj - 1e-9
        traj, obj = cand, new
    assert mean_dist(traj) < before
    assert not validate_solution(cfg, assemble_solution(cfg, traj, sched, power), tol=1e-6)


# -- alternating solver ----------------------------------------------------------


def test_zero_weights_return_initialization(short_cfg):
    cfg = short_cfg.with_weights(0.0, 0.0)
    traj, sched, power, info = init_circular(cfg)
    sol = run_bcd(cfg, BcdOptions(), traj, sched, power, info)
    assert sol.objective_value == 0.0
    np.testing.assert_array_equal(sol.trajectory.q_b, traj.q_b)
    np.testing.assert_array_equal(sol.schedule.y, sched.y)
    np.testing.assert_array_equal(sol.power.p_s, power.p_s)


@pytest.fixture(scope="module")
def short_schemes():
    cfg = make_config(T=10.0, N=20, uav_bs=Endpoints([300, 700], [700, 700], 600, 600),
                      uav_ap=Endpoints([300, 300], [700, 300], 500, 500))
    return cfg, {s: run_benchmark_scheme(cfg, s) for s in SCHEMES}


def test_history_is_monotone(short_schemes):
    _, sols = short_schemes
    for sol in sols.values():
        h = np.array(sol.diagnostics["history"])
        assert np.all(np.diff(h) >= -1e-6)
        assert sol.diagnostics["outer_iterations"] <= 25


def test_schemes_are_feasible_and_binary(short_schemes):
    cfg, sols = short_schemes
    for sol in sols.values():
        assert not validate_solution(cfg, sol, tol=1e-6)
        assert sol.schedule.binary


def test_only_power_keeps_straight_line(short_schemes):
    cfg, sols = short_schemes
    straight = init_straight(cfg)
    t = sols["only power"].trajectory
    for name in ("q_u", "H_u", "q_b", "H_b"):
        np.testing.assert_array_equal(getattr(t, name), getattr(straight, name))


def test_no_power_schemes_keep_full_power_where_scheduled(short_schemes):
    cfg, sols = short_schemes
    for name in ("3D traj & no power", "2D traj & no power"):
        sol = sols[name]
        on = sol.schedule.y > 0
        np.testing.assert_array_equal(sol.power.p_s[on], cfg.p_max_sn)


def test_two_dimensional_schemes_keep_altitudes(short_schemes):
    cfg, sols = short_schemes
    init, *_ = init_circular(cfg)
    for name in ("2D traj & power", "2D traj & no power"):
        np.testing.assert_array_equal(sols[name].trajectory.H_b, init.H_b)


def test_full_scheme_dominates(short_schemes):
    _, sols = short_schemes
    best = sols["3D traj & power"].objective_value
    for name, sol in sols.items():
        assert best >= sol.objective_value - 1e-4, name
