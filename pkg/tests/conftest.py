import numpy as np
import pytest

from edgeshare.dual_solver import check_scenario_feasible
from edgeshare.model import Scenario, SystemParams, UserParams


def make_system(num_users: int, **overrides) -> SystemParams:
    kw = dict(T_max=0.02, E_max=2e-4 * num_users, num_users=num_users)
    kw.update(overrides)
    return SystemParams(**kw)


def random_scenario(rng: np.random.Generator, u_min: int = 2, u_max: int = 10,
                    t_range=(0.01, 0.05), frac_range=(0.1, 0.8),
                    d_i: float = 10e3, **sys_overrides) -> Scenario:
    """Feasible random instance with pathloss-derived channels."""
    for _ in range(50):
        u = int(rng.integers(u_min, u_max + 1))
        sysp = make_system(u, T_max=float(rng.uniform(*t_range)),
                           **sys_overrides)
        users = [UserParams.at_distance(d_i, float(d))
                 for d in rng.uniform(0.05, 0.5, u)]
        scenario = Scenario(sysp, users,
                            D_S=float(rng.uniform(*frac_range)) * d_i)
        try:
            check_scenario_feasible(scenario)
            return scenario
        except Exception:
            continue
    raise RuntimeError("could not draw a feasible scenario")


def random_feasible_allocation(rng: np.random.Generator, scenario: Scenario):
    """Strictly feasible random allocation (times fill at most the budget)."""
    import edgeshare.model as model

    sys = scenario.sys
    b_tot = sys.T_max - model.downlink_shared_latency(scenario)
    for _ in range(200):
        u = scenario.U
        d_l = rng.uniform(0.0, 1.0, u) * scenario.local_bits_cap()
        split = rng.uniform(0.1, 1.0, u)
        split = split / split.sum() * scenario.D_S
        m = rng.uniform(0.3, 0.7) * b_tot
        c = b_tot - m
        bar = scenario.indiv_bits(d_l)
        t_us = np.where(split > 0, m * rng.uniform(0.2, 0.5, u), 0.0)
        t_ui = np.where(bar > 0, m - t_us, 0.0)
        t_dl = np.where(bar > 0, c * rng.uniform(0.5, 1.0, u), 0.0)
        alloc = model.Allocation(t_us, t_ui, t_dl, float(np.max(t_dl,
                                                                initial=0.0)),
                                 np.full(u, sys.T_max), d_l, split)
        if model.bs_downlink_energy(scenario, alloc) <= sys.E_max \
                and not model.check_feasible(scenario, alloc, tol=1e-12):
            return alloc
    raise RuntimeError("could not draw a feasible allocation")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
