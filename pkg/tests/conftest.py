import numpy as np
import pytest

from uavplan.scenario import Endpoints, ScenarioConfig, Trajectory


def make_config(sns=((500.0, 550.0),), aps=((500.0, 450.0),), T=40.0, N=80, **overrides):
    """Single-pair corridor geometry by default; any field can be overridden."""
    fields = dict(
        sn_positions=np.asarray(sns, float),
        ap_positions=np.asarray(aps, float),
        uav_bs=Endpoints([0, 700], [1000, 700], 600, 600),
        uav_ap=Endpoints([0, 300], [1000, 300], 500, 500),
        period_T=T,
        slot_count_N=N,
        v_xy_max=50.0,
        v_z_max=30.0,
        h_min=100.0,
        h_max=600.0,
        d_min=10.0,
        p_max_uav=0.1,
        p_max_sn=0.1,
        beta0=1e-6,
        weight_beta1=1.0,
        weight_beta2=1.0 / 3.0,
    )
    fields.update(overrides)
    return ScenarioConfig(**fields)


def make_small_pair(N=4, beta2=1.0, seed=None, T_per_slot=4.0):
    """K = L = 2 with UAVs on short straight corridors; random nodes when seeded."""
    if seed is None:
        sns = [[-150, 80], [120, -60]]
        aps = [[450, 120], [650, -150]]
    else:
        rng = np.random.default_rng(seed)
        sns = rng.uniform(-300, 300, (2, 2))
        aps = rng.uniform(-300, 300, (2, 2)) + [500, 0]
    return make_config(
        sns, aps, T=N * T_per_slot, N=N,
        uav_bs=Endpoints([-100, 0], [100, 0], 300, 300),
        uav_ap=Endpoints([400, 0], [600, 0], 200, 200),
        weight_beta2=beta2,
    )


def hover_trajectory(cfg, w_b, H_b, w_u, H_u):
    """Both UAVs parked at fixed points for every slot (ignores the endpoints)."""
    n = cfg.N + 1
    return Trajectory(
        q_u=np.tile(np.asarray(w_u, float), (n, 1)), H_u=np.full(n, float(H_u)),
        q_b=np.tile(np.asarray(w_b, float), (n, 1)), H_b=np.full(n, float(H_b)),
    )


@pytest.fixture
def single_pair_cfg():
    return make_config()


@pytest.fixture
def short_cfg():
    return make_config(T=10.0, N=20, uav_bs=Endpoints([300, 700], [700, 700], 600, 600),
                       uav_ap=Endpoints([300, 300], [700, 300], 500, 500))
