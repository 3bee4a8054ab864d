"""Comparison schemes: local-only, shared-unaware, full-offload, equal-time.

Each scheme consumes the same Scenario and produces an allocation plus its
total mobile energy, so sweeps can tabulate all of them side by side.  The
shared-unaware and full-offload schemes reuse the dual solver on restricted
or reinterpreted problems; equal-time is a restricted convex program solved
by nested scan-and-refine searches over its three common time variables.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import model
from .dual_solver import SolverOptions, solve
from .model import (Allocation, InfeasibleScenarioError, Scenario, SolveReport)

LN2 = math.log(2.0)


class BaselineKind(enum.Enum):
    LOCAL_ONLY = "local_only"
    NO_SHARED_AWARENESS = "no_shared"
    FULL_OFFLOAD_ONLY = "full_offload"
    EQUAL_TIME = "equal_time"


@dataclass
class SchemeResult:
    kind: BaselineKind
    allocation: Allocation
    energy_j: float
    report: SolveReport | None = None


def local_only(scenario: Scenario) -> SchemeResult:
    """Everything computed on-device within T_max; no radio usage at all."""
    sys = scenario.sys
    need = sys.lambda0 * scenario.D_I
    have = sys.T_max * scenario.f_max
    bad = np.nonzero(need > have)[0]
    if bad.size:
        raise InfeasibleScenarioError(
            [f"user {u}: needs {need[u]:.3g} cycles but local CPU gives "
             f"{have[u]:.3g} in T_max" for u in bad])
    alloc = Allocation.zeros(scenario.U)
    alloc.t_local = np.full(scenario.U, sys.T_max)
    alloc.D_L = scenario.D_I.copy()
    energy = float(np.sum(sys.kappa0 * (sys.lambda0 * scenario.D_I) ** 3
                          / sys.T_max**2))
    return SchemeResult(BaselineKind.LOCAL_ONLY, alloc, energy)


def no_shared_awareness(scenario: Scenario,
                        opts: SolverOptions | None = None) -> SchemeResult:
    """Ignore the overlap: every user uploads its own copy of the shared bits.

    Solved as the same problem with the shared pool declared empty (inputs
    unchanged), so the common data is redundantly uploaded by everyone and
    its results come back over the unicast links.
    """
    blind = Scenario(scenario.sys, scenario.users, D_S=0.0)
    report = solve(blind, opts)
    return SchemeResult(BaselineKind.NO_SHARED_AWARENESS, report.allocation,
                        report.primal_value, report)


def full_offload_only(scenario: Scenario,
                      opts: SolverOptions | None = None) -> SchemeResult:
    """Local CPUs excluded: all input bits go to the cloudlet."""
    report = solve(scenario, opts, pin_local_zero=True)
    return SchemeResult(BaselineKind.FULL_OFFLOAD_ONLY, report.allocation,
                        report.primal_value, report)


def _et_local_bits(scenario: Scenario, t_i, t_d, mu):
    """Best local bits per user for fixed common times and BS-energy price mu.

    Roots the increasing marginal balance: local CPU marginal equals the
    uplink marginal plus mu times the BS unicast marginal.  Shapes: t_i, t_d,
    mu are (k,), result is (k, U).
    """
    sys = scenario.sys
    cap = scenario.local_bits_cap()
    k = np.asarray(t_i).size
    lo = np.zeros((k, scenario.U))
    hi = np.broadcast_to(cap, (k, scenario.U)).copy()
    t_i = np.asarray(t_i, dtype=float)[:, None]
    t_d = np.asarray(t_d, dtype=float)[:, None]
    mu = np.asarray(mu, dtype=float)[:, None]
    coef = 3.0 * sys.kappa0 * sys.lambda0**3 / sys.T_max**2

    def resid(d):
        bar = scenario.indiv_bits(d)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            r_ul = np.where(t_i > 0, bar / np.where(t_i > 0, t_i, 1.0), np.inf)
            m_ul = model.f_power_deriv(r_ul, scenario.W_ul_user, scenario.N0_ul) \
                / scenario.h_sq
            r_dl = np.where(t_d > 0, sys.a0 * bar / np.where(t_d > 0, t_d, 1.0),
                            np.inf)
            m_dl = mu * sys.a0 * model.f_power_deriv(
                r_dl, scenario.W_dl_user, scenario.N0_dl) / scenario.g_sq
        return coef * d**2 - m_ul - m_dl

    for _ in range(44):
        mid = 0.5 * (lo + hi)
        go_right = resid(mid) < 0.0
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    return 0.5 * (lo + hi)


def _et_energy(scenario: Scenario, ds_each: float, t_s, t_i, t_d):
    """Equal-time total energy for candidate common times (vectorized).

    Local bits are optimized per candidate; when the BS budget binds, the
    budget price is found by a monotone scan-refine on log(mu).  Infeasible
    candidates evaluate to inf.
    """
    sys = scenario.sys
    t_s = np.asarray(t_s, dtype=float)
    t_i = np.asarray(t_i, dtype=float)
    t_d = np.asarray(t_d, dtype=float)
    k = t_s.size
    t_sdl_u = model.downlink_shared_times(scenario)

    def bse_of(d, td):
        bits = sys.a0 * scenario.indiv_bits(d)
        t = np.where(bits > 0, td[:, None], 0.0)
        return np.sum(model.tx_energy(bits, t, scenario.g_sq, scenario.N0_dl,
                                      scenario.W_dl_user), axis=1)

    d = _et_local_bits(scenario, t_i, t_d, np.zeros(k))
    bse = bse_of(d, t_d)
    cap = scenario.local_bits_cap()
    bse_cap = bse_of(np.broadcast_to(cap, (k, scenario.U)), t_d)
    tight = (bse > sys.E_max) & (bse_cap <= sys.E_max)
    if np.any(tight):
        ti_t, td_t = t_i[tight], t_d[tight]
        n_t = ti_t.size
        lo = np.full(n_t, math.log(1e-30))
        hi = np.full(n_t, math.log(1e30))
        frac = np.linspace(0.0, 1.0, 9)[:, None]
        for _ in range(7):
            grid = lo + (hi - lo) * frac                  # (9, n_t)
            dj = _et_local_bits(scenario, np.tile(ti_t, 9), np.tile(td_t, 9),
                                np.exp(grid).ravel())
            bse_j = bse_of(dj, np.tile(td_t, 9)).reshape(9, n_t)
            ok = bse_j <= sys.E_max
            idx = np.argmax(ok, axis=0)
            idx = np.where(ok.any(axis=0), idx, 8)
            ilo = np.maximum(idx - 1, 0)
            lo = np.take_along_axis(grid, ilo[None, :], 0)[0]
            hi = np.take_along_axis(grid, idx[None, :], 0)[0]
        d_t = _et_local_bits(scenario, ti_t, td_t, np.exp(hi))
        d_new = d.copy()
        d_new[tight] = d_t
        d = d_new
        bse = bse_of(d, t_d)
    bar = scenario.indiv_bits(d)
    e_ul_s = np.sum(model.tx_energy(ds_each, t_s[:, None], scenario.h_sq,
                                    scenario.N0_ul, scenario.W_ul_user), axis=1)
    e_ul_i = np.sum(model.tx_energy(bar, t_i[:, None], scenario.h_sq,
                                    scenario.N0_ul, scenario.W_ul_user), axis=1)
    e_loc = np.sum(model.local_energy(sys, d, sys.T_max), axis=1)
    e_dec = np.sum((t_sdl_u + t_d[:, None]) * scenario.rho_dl, axis=1)
    energy = e_ul_s + e_ul_i + e_loc + e_dec
    energy = np.where(bse > sys.E_max * (1 + 1e-9), np.inf, energy)
    return energy, d


def equal_time(scenario: Scenario, shared_split: str = "equal") -> SchemeResult:
    """All users get identical upload/download slot lengths.

    The shared pool is split evenly across users ("equal") or redundantly
    sent in full by everyone ("full-copy"); the three common times are then
    optimized by nested scan-and-refine over the latency budget, with local
    bits re-optimized per candidate.
    """
    if shared_split not in ("equal", "full-copy"):
        raise ValueError("shared_split must be 'equal' or 'full-copy'")
    sys = scenario.sys
    t_sdl = model.downlink_shared_latency(scenario)
    b_tot = sys.T_max - t_sdl
    if b_tot <= 0:
        raise InfeasibleScenarioError("shared multicast alone exceeds T_max")
    ds_each = 0.0 if scenario.D_S == 0 else (
        scenario.D_S / scenario.U if shared_split == "equal" else scenario.D_S)

    eps = 1e-9

    def inner_best(t_d):
        """Best energy over the shared/individual split of B - t_d."""
        k = t_d.size
        window = b_tot - t_d
        if ds_each == 0:
            e, _ = _et_energy(scenario, 0.0, np.zeros(k), window, t_d)
            return e, np.zeros(k)
        lo = np.full(k, eps)
        hi = np.full(k, 1.0 - eps)
        fr = np.linspace(0.0, 1.0, 9)[:, None]
        best_x = np.full(k, 0.5)
        for _ in range(7):
            x = lo + (hi - lo) * fr                      # (9, k)
            e, _ = _et_energy(scenario, ds_each, (x * window).ravel(),
                              ((1 - x) * window).ravel(),
                              np.broadcast_to(t_d, x.shape).ravel())
            e = e.reshape(x.shape)
            i = np.argmin(e, axis=0)
            best_x = np.take_along_axis(x, i[None, :], 0)[0]
            ilo = np.maximum(i - 1, 0)
            ihi = np.minimum(i + 1, 8)
            new_lo = np.take_along_axis(x, ilo[None, :], 0)[0]
            new_hi = np.take_along_axis(x, ihi[None, :], 0)[0]
            lo, hi = new_lo, new_hi
        e, _ = _et_energy(scenario, ds_each, best_x * window,
                          (1 - best_x) * window, t_d)
        return e, best_x

    lo_d, hi_d = 0.0, b_tot * (1 - eps)
    best = (math.inf, 0.0, 0.0)
    for _ in range(8):
        t_d = np.linspace(lo_d, hi_d, 13)
        e, xs = inner_best(t_d)
        i = int(np.argmin(e))
        best = (float(e[i]), float(t_d[i]), float(xs[i]))
        lo_d = float(t_d[max(i - 1, 0)])
        hi_d = float(t_d[min(i + 1, 12)])
    e_best, td, x = best
    if not math.isfinite(e_best):
        raise InfeasibleScenarioError("equal-time restriction is infeasible")

    window = b_tot - td
    ts, ti = x * window, (1 - x) * window
    _, d = _et_energy(scenario, ds_each, np.array([ts]), np.array([ti]),
                      np.array([td]))
    d = d[0]
    if scenario.D_S > 0:
        split = np.full(scenario.U, ds_each)
        t_s_vec = np.full(scenario.U, ts)
    else:
        split = np.zeros(scenario.U)
        t_s_vec = np.zeros(scenario.U)
    alloc = Allocation(t_s_vec, np.full(scenario.U, ti),
                       np.full(scenario.U, td), td,
                       np.full(scenario.U, sys.T_max), d, split)
    return SchemeResult(BaselineKind.EQUAL_TIME, alloc,
                        model.total_energy(scenario, alloc))
