import math

import numpy as np
import pytest

import edgeshare.dual_solver as ds
import edgeshare.model as model
from edgeshare.model import (Allocation, DualPoint, InfeasibleScenarioError,
                             Scenario, SystemParams, UserParams)

from conftest import make_system, random_feasible_allocation, random_scenario


def _golden_min(fn, lo, hi, iters=200):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def _dual(rng, u, beta_scale=1.0):
    return DualPoint(beta=10 ** rng.uniform(-3, 0, u) * beta_scale,
                     omega=10 ** rng.uniform(-14, -10, u),
                     sigma=10 ** rng.uniform(-3, 0, u),
                     nu=float(10 ** rng.uniform(-2, 1)))


def test_optimal_times_zero_bits(rng):
    sc = random_scenario(rng, 2, 2)
    dual = _dual(rng, 2)
    d_l = sc.D_I - sc.D_S                      # everything local
    t_us, t_ui, t_dl = ds.optimal_times(dual, sc, d_l, np.zeros(2))
    assert np.all(t_us == 0) and np.all(t_ui == 0) and np.all(t_dl == 0)


def test_optimal_times_shared_equals_individual_rate(rng):
    sc = random_scenario(rng, 3, 3)
    dual = _dual(rng, 3)
    d_l = np.zeros(3)
    split = np.array([sc.D_S, 0, 0])
    t_us, t_ui, _ = ds.optimal_times(dual, sc, d_l, split)
    bar = sc.indiv_bits(d_l)
    # same per-user rate on both uplink slots
    r_shared = split[0] / t_us[0]
    r_indiv = bar[0] / t_ui[0]
    assert r_shared == pytest.approx(r_indiv, rel=1e-12)


def test_optimal_times_minimize_priced_energy(rng):
    """Slot time from the rate closed form beats a golden-section search."""
    sc = random_scenario(rng, 1, 1)
    beta = 0.3
    dual = DualPoint(np.array([beta]), np.zeros(1), np.zeros(1), 1.0)
    bits = 5e3
    _, t_ui, _ = ds.optimal_times(dual, sc, np.array([sc.D_I[0] - sc.D_S
                                                      - bits]),
                                  np.zeros(1))

    def cost(t):
        return model.tx_energy(bits, t, sc.h_sq[0], sc.N0_ul,
                               sc.W_ul_user) + beta * t

    t_ref, _ = _golden_min(cost, 1e-6, 1.0)
    assert t_ui[0] == pytest.approx(t_ref, rel=1e-6)
    assert cost(t_ui[0]) <= cost(t_ref) * (1 + 1e-12)


def test_optimal_t_dl_aux_branches(rng):
    sc = random_scenario(rng, 2, 2)
    t_sdl = model.downlink_shared_latency(sc)
    on = DualPoint(np.array([0.5, 0.5]), np.zeros(2), np.zeros(2), 1.0)
    assert ds.optimal_t_dl_aux(on, sc) == 0.0
    off = DualPoint(np.zeros(2), np.zeros(2), np.array([0.5, 0.5]), 1.0)
    assert ds.optimal_t_dl_aux(off, sc) == pytest.approx(
        sc.sys.T_max - t_sdl, rel=1e-12)
    tie = DualPoint(np.array([0.5, 0.5]), np.zeros(2), np.array([0.5, 0.5]),
                    1.0)
    assert ds.optimal_t_dl_aux(tie, sc) == pytest.approx(
        sc.sys.T_max - t_sdl, rel=1e-12)


def test_optimal_local_bits_clamps(rng):
    sc = random_scenario(rng, 2, 2)
    huge_omega = DualPoint(np.full(2, 0.1), np.full(2, 1.0), np.zeros(2), 1.0)
    assert np.all(ds.optimal_local_bits(huge_omega, sc) == 0.0)
    tiny_noise = DualPoint(np.full(2, 1e3), np.zeros(2), np.zeros(2), 1e6)
    assert np.all(ds.optimal_local_bits(tiny_noise, sc)
                  == sc.D_I - sc.D_S)


def test_optimal_local_bits_grid_oracle(rng):
    """Closed form matches a 10^4-point scan of the per-user dual cost."""
    sc = random_scenario(rng, 1, 1, frac_range=(0.1, 0.3))
    dual = DualPoint(np.array([0.05]), np.array([1e-12]), np.array([0.01]),
                     2.0)
    d_hat = ds.optimal_local_bits(dual, sc)[0]
    r_ul, r_dl = ds._rates(ds._Ctx(sc), dual.beta, dual.sigma, dual.nu)

    def reduced_cost(d):
        bar = sc.D_I[0] - sc.D_S - d
        t_ui = bar / r_ul[0]
        t_dl = sc.sys.a0 * bar / r_dl[0]
        e = model.tx_energy(bar, t_ui, sc.h_sq[0], sc.N0_ul, sc.W_ul_user)
        e += model.local_energy(sc.sys, d, sc.sys.T_max)
        e += dual.beta[0] * t_ui + dual.omega[0] * sc.sys.lambda0 * d
        e += (sc.rho_dl[0] + dual.sigma[0]) * t_dl
        e += dual.nu * model.tx_energy(sc.sys.a0 * bar, t_dl, sc.g_sq[0],
                                       sc.N0_dl, sc.W_dl_user)
        return e

    grid = np.linspace(0.0, sc.D_I[0] - sc.D_S, 10001)
    vals = np.array([reduced_cost(d) for d in grid])
    d_grid = grid[int(np.argmin(vals))]
    cell = grid[1] - grid[0]
    assert abs(d_hat - d_grid) <= cell
    assert reduced_cost(d_hat) <= vals.min() * (1 + 1e-12)


def test_assign_shared_data(rng):
    sc1 = random_scenario(rng, 1, 1)
    split, _ = ds.assign_shared_data(_dual(rng, 1), sc1)
    assert split[0] == sc1.D_S

    # identical prices, better uplink gain wins
    sysp = make_system(2)
    users = [UserParams(1e4, h_sq=2e-11, g_sq=1e-11),
             UserParams(1e4, h_sq=1e-11, g_sq=1e-11)]
    sc2 = Scenario(sysp, users, D_S=4e3)
    dual = DualPoint(np.full(2, 0.1), np.zeros(2), np.zeros(2), 1.0)
    split, delta = ds.assign_shared_data(dual, sc2)
    assert delta[0] < delta[1]
    assert split[0] == sc2.D_S and split[1] == 0.0

    # 3-user winner matches the simplex-grid LP oracle
    from edgeshare.oracle import lp_shared_split_grid
    sc3 = random_scenario(rng, 3, 3)
    dual3 = _dual(rng, 3)
    split3, delta3 = ds.assign_shared_data(dual3, sc3)
    ref, _ = lp_shared_split_grid(delta3, sc3.D_S, steps=100)
    assert np.allclose(split3, ref)


def test_eval_dual_weak_duality(rng):
    sc = random_scenario(rng, 2, 4)
    feas_vals = [model.total_energy(sc, random_feasible_allocation(rng, sc))
                 for _ in range(20)]
    for _ in range(12):
        res = ds.eval_dual(_dual(rng, sc.U), sc)
        assert res.dual_value <= min(feas_vals) + 1e-12


def test_eval_dual_full_local_expansion():
    """With floored duals, D_S = 0 and channels bad enough that every bit
    stays local, the dual value reduces by hand-expansion to the local
    energies plus the relaxation constants (all slot times vanish)."""
    sysp = make_system(2, T_max=0.05)
    users = [UserParams(1e4, h_sq=1e-16, g_sq=1e-16),
             UserParams(1e4, h_sq=2e-16, g_sq=2e-16)]
    sc = Scenario(sysp, users, D_S=0.0)
    eps = 1e-12
    dual = DualPoint(np.full(2, eps), np.zeros(2), np.zeros(2), eps)
    res = ds.eval_dual(dual, sc)
    assert np.allclose(res.minimizer.D_L, sc.D_I, rtol=1e-12)
    expect = float(np.sum(model.local_energy(sc.sys, sc.D_I, sysp.T_max)))
    # sum(beta) > sum(sigma) puts the auxiliary download time at zero, so the
    # beta terms contribute -beta*T_max each; nu contributes -nu*E_max
    expect += float(np.sum(dual.beta * (-sysp.T_max)))
    expect += dual.nu * (-sysp.E_max)
    assert res.dual_value == pytest.approx(expect, rel=1e-9)


def test_eval_dual_subgradient_concavity_cuts(rng):
    sc = random_scenario(rng, 2, 3)
    for _ in range(10):
        d1, d2 = _dual(rng, sc.U), _dual(rng, sc.U)
        r1 = ds.eval_dual(d1, sc)
        v1 = np.concatenate([d1.beta, d1.omega, d1.sigma, [d1.nu]])
        v2 = np.concatenate([d2.beta, d2.omega, d2.sigma, [d2.nu]])
        r2 = ds.eval_dual(d2, sc)
        # supergradient inequality of the concave dual
        bound = r1.dual_value + float(r1.subgradients @ (v2 - v1))
        assert r2.dual_value <= bound + 1e-9 * max(1.0, abs(bound))


def _single_user_reference(sc):
    """2-variable scan oracle: local bits x uplink window, downlink exact."""
    sys = sc.sys
    b_tot = sys.T_max

    def energy_for(d_l):
        bar = sc.D_I[0] - d_l
        if bar == 0:
            return model.local_energy(sys, d_l, sys.T_max)
        dl_bits = sys.a0 * bar

        def at_window(m):
            c = b_tot - m
            t = _bse_root(sc, dl_bits, c)
            if t is None:
                return math.inf
            e = model.tx_energy(bar, m, sc.h_sq[0], sc.N0_ul, sc.W_ul_user)
            e += model.local_energy(sys, d_l, sys.T_max)
            e += sc.rho_dl[0] * t
            return e

        _, val = _golden_min(at_window, 1e-8, b_tot * (1 - 1e-9), iters=120)
        return val

    _, best = _golden_min(energy_for, 0.0, float(sc.local_bits_cap()[0]),
                          iters=120)
    return best


def _bse_root(sc, dl_bits, cap):
    """Smallest download time meeting the BS budget (None if impossible)."""
    def bse(t):
        return model.tx_energy(dl_bits, t, sc.g_sq[0], sc.N0_dl, sc.W_dl_user)

    if cap <= 0 or bse(cap) > sc.sys.E_max:
        return None
    lo, hi = cap * 1e-12, cap
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bse(mid) > sc.sys.E_max:
            lo = mid
        else:
            hi = mid
    return hi


def test_solve_single_user_matches_nested_scan(rng):
    sysp = make_system(1, T_max=0.04)
    sc = Scenario(sysp, [UserParams.at_distance(1e4, 0.3)], D_S=0.0)
    rep = ds.solve(sc)
    ref = _single_user_reference(sc)
    assert rep.primal_value == pytest.approx(ref, rel=1e-3)
    assert rep.dual_value <= ref * (1 + 1e-9)


def test_solve_winner_take_all_and_certificates(rng):
    for _ in range(6):
        sc = random_scenario(rng, 2, 5)
        rep = ds.solve(sc)
        carriers = np.sum(rep.allocation.D_S_split > 1e-6 * sc.D_S)
        assert carriers == 1
        assert rep.rel_gap <= 1e-3
        assert model.check_feasible(sc, rep.allocation, tol=1e-9) == []
        # dual never exceeds the final primal along the whole trace
        assert max(v for _, v, _ in rep.trace) <= rep.primal_value + 1e-15
        # best dual is nondecreasing over iterations
        best = -math.inf
        for _, v, _ in rep.trace:
            best = max(best, v)
        assert best == rep.dual_value


def test_solve_stationarity_identity(rng):
    """Uplink rates at the solution satisfy f(r) - r f'(r) = -beta|h|^2."""
    sc = random_scenario(rng, 3, 3)
    rep = ds.solve(sc)
    beta = rep.dual.beta
    from edgeshare.lambertw import rate_from_dual
    r = rate_from_dual(beta, sc.h_sq, sc.N0_ul, sc.W_ul_user)
    f = model.f_power(r, sc.W_ul_user, sc.N0_ul)
    fp = model.f_power_deriv(r, sc.W_ul_user, sc.N0_ul)
    lhs = f - r * fp
    assert np.all(np.abs(lhs + beta * sc.h_sq)
                  <= 1e-9 * np.maximum(beta * sc.h_sq, 1e-300))


def test_solve_monotone_in_latency_budget(rng):
    sc = random_scenario(rng, 3, 3, t_range=(0.02, 0.03))
    rep1 = ds.solve(sc)
    relaxed = Scenario(SystemParams(**{**sc.sys.__dict__,
                                       "T_max": sc.sys.T_max * 2}),
                       sc.users, D_S=sc.D_S)
    rep2 = ds.solve(relaxed)
    assert rep2.primal_value <= rep1.primal_value * (1 + 1e-9)


def test_solve_infeasible_multicast():
    sysp = make_system(2, T_max=1e-4)
    users = [UserParams.at_distance(1e4, 0.4), UserParams.at_distance(1e4, 0.5)]
    sc = Scenario(sysp, users, D_S=9e3)
    with pytest.raises(InfeasibleScenarioError):
        ds.solve(sc)


def test_kkt_residuals_behaviour(rng):
    sc = random_scenario(rng, 3, 3)
    rep = ds.solve(sc)
    scale = max(1.0, rep.primal_value)
    for name, value in rep.kkt_residuals.items():
        assert value <= 1e-6 * scale, (name, value)

    # perturbing an uplink slot changes the latency complementarity product
    alloc = rep.allocation
    bumped = Allocation(alloc.t_ul_shared.copy(), alloc.t_ul_ind * 1.1,
                        alloc.t_dl_ind.copy(), alloc.t_dl_aux,
                        alloc.t_local.copy(), alloc.D_L.copy(),
                        alloc.D_S_split.copy())
    r0 = ds.kkt_residuals(sc, alloc, rep.dual)
    r1 = ds.kkt_residuals(sc, bumped, rep.dual)
    assert r1["comp-latency"] != pytest.approx(r0["comp-latency"], rel=1e-3)

    # all-zero duals with a feasible interior point: every product vanishes
    interior = random_feasible_allocation(rng, sc)
    zero = DualPoint(np.zeros(sc.U), np.zeros(sc.U), np.zeros(sc.U), 0.0)
    res = ds.kkt_residuals(sc, interior, zero)
    for name, value in res.items():
        if name.startswith("comp"):
            assert value == 0.0


def test_trace_csv(rng):
    sc = random_scenario(rng, 2, 2)
    rep = ds.solve(sc)
    text = ds.trace_to_csv(rep)
    lines = text.strip().splitlines()
    assert lines[0] == "iteration,dual_value,gap_bound"
    assert len(lines) - 1 == len(rep.trace)
    it, val, bound = lines[1].split(",")
    assert (int(it), float(val), float(bound)) == rep.trace[0]
