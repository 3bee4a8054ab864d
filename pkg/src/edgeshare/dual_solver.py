"""Lagrangian-dual solver for the joint offloading / link-time problem.

The primal problem minimizes total mobile energy subject to the per-user
latency budget, the BS downlink energy budget, the local CPU-cycle caps and
the shared-data split constraints, with the local computing window pinned at
T_max (local energy is decreasing in it).  Relaxing the latency, cycle-cap,
auxiliary-download and BS-energy constraints yields a dual function whose
inner minimizer is closed-form:

* slot times follow from per-slot stationarity via the Lambert W rate form;
* the auxiliary download bound is bang-bang in the sign of sum(beta)-sum(sigma);
* local bits come from a clamped square-root expression;
* the shared upload goes entirely to the user with the smallest marginal
  price ``delta_u`` (winner-take-all).

The concave dual is maximized by the ellipsoid method with feasibility cuts
for negative multipliers and supergradient cuts otherwise, tracking the best
iterate.  A feasible primal is then recovered from the best dual point by
fixing the discrete-like decisions (carrier, local bits) and re-optimizing
the remaining time allocation exactly (one-dimensional convex searches).

Internally the ellipsoid works on a normalized dual vector: each constraint
is divided by its natural scale (T_max, T_max*f_max, E_max), making every
multiplier carry units of joules and every subgradient O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .lambertw import rate_from_dual
from .model import (Allocation, DualPoint, InfeasibleScenarioError, Scenario,
                    SolveReport)

LN2 = math.log(2.0)


class DegenerateDualError(RuntimeError):
    """Dual point yields zero rates for positive bits (unbounded slot time)."""


@dataclass
class SolverOptions:
    max_iters: int | None = None    # None: 500 * dim**2
    eps_stop: float = 1e-8          # stop when gap bound <= eps_stop*max(1, |best|)
    eps_dual: float = 1e-12         # floor for beta and nu inside eval_dual
    radius: float = 1e4             # initial ellipsoid radius (normalized space)
    rel_gap_floor: float = 1e-12    # denominator floor in rel_gap


@dataclass
class DualEvalResult:
    dual_value: float
    minimizer: Allocation
    subgradients: np.ndarray        # constraint values, model units, 3U+1 (or 2U+1)
    delta: np.ndarray               # per-user shared-upload marginal price


@dataclass
class EllipsoidState:
    center: np.ndarray
    shape_matrix: np.ndarray
    iteration: int
    best_dual: float
    best_point: DualPoint | None


class _Ctx:
    """Per-scenario constants used by the hot dual-evaluation path."""

    def __init__(self, scenario: Scenario, pin_local_zero: bool = False):
        self.sc = scenario
        self.pin = pin_local_zero
        s = scenario.sys
        self.U = scenario.U
        self.T = s.T_max
        self.a0 = s.a0
        self.kl3 = 3.0 * s.kappa0 * s.lambda0**3
        self.W_ul = scenario.W_ul_user
        self.W_dl = scenario.W_dl_user
        self.N0_ul = scenario.N0_ul
        self.N0_dl = scenario.N0_dl
        self.t_sdl_u = model.downlink_shared_times(scenario)
        self.t_sdl = float(np.max(self.t_sdl_u, initial=0.0))
        self.d_cap = scenario.D_I - scenario.D_S
        self.cycle_cap = self.T * scenario.f_max


def _rates(ctx: _Ctx, beta, sigma, nu):
    """Stationary uplink/downlink rates for (floored) duals."""
    sc = ctx.sc
    r_ul = rate_from_dual(beta, sc.h_sq, ctx.N0_ul, ctx.W_ul)
    price_dl = (sc.rho_dl + sigma) / nu
    r_dl = rate_from_dual(price_dl, sc.g_sq, ctx.N0_dl, ctx.W_dl)
    return r_ul, r_dl


def optimal_times(dual: DualPoint, scenario: Scenario, D_L, D_S_split):
    """Lagrangian-minimizing slot times for fixed bit decisions.

    Returns (t_ul_shared, t_ul_ind, t_dl_ind).  Zero bits give zero time;
    positive bits at zero rate raise DegenerateDualError (callers avoid this
    by flooring beta and nu).
    """
    ctx = _Ctx(scenario)
    if dual.nu <= 0:
        raise DegenerateDualError("nu = 0 makes the downlink price singular")
    r_ul, r_dl = _rates(ctx, dual.beta, dual.sigma, dual.nu)
    D_L = np.asarray(D_L, dtype=float)
    split = np.asarray(D_S_split, dtype=float)
    bar_d = scenario.indiv_bits(D_L)
    dl_bits = ctx.a0 * bar_d
    for bits, r in ((split, r_ul), (bar_d, r_ul), (dl_bits, r_dl)):
        if np.any((bits > 0) & (r <= 0)):
            raise DegenerateDualError("positive bits at zero rate (unbounded time)")
    with np.errstate(divide="ignore", invalid="ignore"):
        t_us = np.where(split > 0, split / r_ul, 0.0)
        t_ui = np.where(bar_d > 0, bar_d / r_ul, 0.0)
        t_dl = np.where(dl_bits > 0, dl_bits / r_dl, 0.0)
    return t_us, t_ui, t_dl


def optimal_t_dl_aux(dual: DualPoint, scenario: Scenario) -> float:
    """Bang-bang minimizer of the auxiliary download bound on [0, T - t_sdl]."""
    t_sdl = model.downlink_shared_latency(scenario)
    if t_sdl > scenario.sys.T_max:
        raise InfeasibleScenarioError("shared multicast alone exceeds T_max")
    if float(np.sum(dual.beta) - np.sum(dual.sigma)) > 0.0:
        return 0.0
    return scenario.sys.T_max - t_sdl


def optimal_local_bits(dual: DualPoint, scenario: Scenario) -> np.ndarray:
    """Closed-form local bits: clamped root of the marginal-cost balance."""
    ctx = _Ctx(scenario)
    if dual.nu <= 0:
        raise DegenerateDualError("nu = 0 makes the downlink price singular")
    r_ul, r_dl = _rates(ctx, dual.beta, dual.sigma, dual.nu)
    return _local_bits(ctx, dual.omega, dual.nu, r_ul, r_dl)


def _local_bits(ctx: _Ctx, omega, nu, r_ul, r_dl):
    sc = ctx.sc
    if ctx.pin:
        return np.zeros(ctx.U)
    with np.errstate(over="ignore"):
        ul_term = ctx.N0_ul * LN2 * np.exp(r_ul / ctx.W_ul * LN2) / (ctx.W_ul * sc.h_sq)
        dl_term = nu * ctx.a0 * ctx.N0_dl * LN2 * np.exp(r_dl / ctx.W_dl * LN2) \
            / (ctx.W_dl * sc.g_sq)
        bracket = (ul_term + dl_term) / ctx.kl3 - omega / (ctx.kl3 / sc.sys.lambda0)
        d = ctx.T * np.sqrt(np.maximum(bracket, 0.0))
    return np.minimum(d, ctx.d_cap)


def assign_shared_data(dual: DualPoint, scenario: Scenario):
    """Winner-take-all shared upload: all of D_S to the cheapest user.

    Returns (split, delta) where delta_u is the energy-plus-latency price of
    routing one shared bit through user u; ties break to the lowest index.
    """
    ctx = _Ctx(scenario)
    r_ul = rate_from_dual(dual.beta, scenario.h_sq, ctx.N0_ul, ctx.W_ul)
    if np.all(r_ul <= 0):
        raise DegenerateDualError("degenerate-duals: all uplink rates are zero")
    delta = _delta(ctx, dual.beta, r_ul)
    split = np.zeros(ctx.U)
    split[int(np.argmin(delta))] = scenario.D_S
    return split, delta


def _delta(ctx: _Ctx, beta, r_ul):
    with np.errstate(divide="ignore", over="ignore"):
        f_r = model.f_power(r_ul, ctx.W_ul, ctx.N0_ul)
        delta = f_r / (r_ul * ctx.sc.h_sq) + beta / r_ul
    return np.where(r_ul > 0, delta, np.inf)


def _eval_raw(ctx: _Ctx, beta, omega, sigma, nu, eps_dual):
    """Dual function value, minimizer pieces, and constraint values."""
    sc = ctx.sc
    beta = np.maximum(beta, eps_dual)
    nu = max(nu, eps_dual)

    r_ul, r_dl = _rates(ctx, beta, sigma, nu)
    d_local = _local_bits(ctx, omega, nu, r_ul, r_dl)
    bar_d = ctx.d_cap - d_local
    dl_bits = ctx.a0 * bar_d

    delta = _delta(ctx, beta, r_ul)
    carrier = int(np.argmin(delta))
    split = np.zeros(ctx.U)
    split[carrier] = sc.D_S

    t_us = np.where(split > 0, split / r_ul, 0.0)
    t_ui = np.where(bar_d > 0, bar_d / r_ul, 0.0)
    t_dl = np.where(dl_bits > 0, dl_bits / r_dl, 0.0)
    t_aux = 0.0 if (beta.sum() - sigma.sum()) > 0.0 else ctx.T - ctx.t_sdl

    e_ul = model.tx_energy(split, t_us, sc.h_sq, ctx.N0_ul, ctx.W_ul) \
        + model.tx_energy(bar_d, t_ui, sc.h_sq, ctx.N0_ul, ctx.W_ul)
    e_loc = model.local_energy(sc.sys, d_local, ctx.T)
    e_dec = (ctx.t_sdl_u + t_dl) * sc.rho_dl
    bse = float(np.sum(model.tx_energy(dl_bits, t_dl, sc.g_sq, ctx.N0_dl, ctx.W_dl)))

    g_beta = t_us + t_ui - ctx.T + ctx.t_sdl + t_aux
    g_omega = sc.sys.lambda0 * d_local - ctx.cycle_cap
    g_sigma = t_dl - t_aux
    g_nu = bse - sc.sys.E_max

    value = float(np.sum(e_ul + e_loc + e_dec) + beta @ g_beta
                  + omega @ g_omega + sigma @ g_sigma + nu * g_nu)
    return value, (t_us, t_ui, t_dl, t_aux, d_local, split), \
        (g_beta, g_omega, g_sigma, g_nu), delta


def eval_dual(dual: DualPoint, scenario: Scenario,
              eps_dual: float = 1e-12, pin_local_zero: bool = False) -> DualEvalResult:
    """Evaluate the dual function at a point (beta and nu floored at eps_dual)."""
    ctx = _Ctx(scenario, pin_local_zero)
    value, parts, grads, delta = _eval_raw(
        ctx, dual.beta, dual.omega, dual.sigma, dual.nu, eps_dual)
    t_us, t_ui, t_dl, t_aux, d_local, split = parts
    alloc = Allocation(t_us, t_ui, t_dl, t_aux, np.full(ctx.U, ctx.T),
                       d_local, split)
    sub = np.concatenate([grads[0], grads[1], grads[2], [grads[3]]])
    return DualEvalResult(value, alloc, sub, delta)


def _bisect_decreasing(fn, lo: float, hi: float, iters: int = 100):
    """Root of a decreasing function on [lo, hi]; assumes fn(lo) >= 0 >= fn(hi)."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def _decode_min(scenario: Scenario, dl_bits: np.ndarray, caps: np.ndarray,
                passes: int = 8, pts: int = 17):
    """Cheapest decoding times within per-candidate window caps.

    For each cap C_k, minimizes sum(rho*t) over 0 <= t <= C_k subject to the
    BS unicast energy for `dl_bits` staying within E_max.  The optimum has
    each unclamped slot priced at a common multiplier mu on the BS energy;
    the vectorized search scans a log-mu grid and refines the sign-change
    bracket of the budget residual (monotone in mu).  Returns (decode, t)
    with decode = inf on caps that cannot meet the budget at all.
    """
    sys = scenario.sys
    n0, w = scenario.N0_dl, scenario.W_dl_user
    caps = np.asarray(caps, dtype=float)
    k = caps.size
    active = dl_bits > 0
    if not np.any(active):
        return np.zeros(k), np.zeros((k, scenario.U))

    t_cap = np.where(active, caps[:, None], 0.0)
    bse_cap = np.sum(model.tx_energy(dl_bits, t_cap, scenario.g_sq, n0, w), axis=1)
    feasible = (bse_cap <= sys.E_max) & (caps > 0)

    lo = np.full(k, math.log(1e-30))
    hi = np.full(k, math.log(1e30))
    frac = np.linspace(0.0, 1.0, pts)[:, None]

    def times_at(log_mu):
        price = scenario.rho_dl / np.exp(log_mu)[..., None]
        r = rate_from_dual(price, scenario.g_sq, n0, w)
        with np.errstate(divide="ignore"):
            t = np.where(active & (r > 0), dl_bits / np.where(r > 0, r, 1.0), np.inf)
        return np.where(active, np.minimum(t, caps[:, None]), 0.0)

    for _ in range(passes):
        grid = lo + (hi - lo) * frac                  # (pts, k)
        t = times_at(grid)                            # (pts, k, U)
        bse = np.sum(model.tx_energy(dl_bits, t, scenario.g_sq, n0, w), axis=2)
        ok = bse <= sys.E_max                         # monotone in mu (axis 0)
        idx = np.argmax(ok, axis=0)
        idx = np.where(ok.any(axis=0), idx, pts - 1)
        ilo = np.maximum(idx - 1, 0)
        lo = np.take_along_axis(grid, ilo[None, :], 0)[0]
        hi = np.take_along_axis(grid, idx[None, :], 0)[0]

    t = times_at(hi[None, :])[0]                      # budget-feasible side
    decode = np.sum(scenario.rho_dl * t, axis=1)
    decode = np.where(feasible, decode, np.inf)
    return decode, t


def _waterfill_split(scenario: Scenario, bar_d: np.ndarray, m: np.ndarray):
    """Exact shared-upload split for each uplink-window candidate.

    Given windows m_k that every user fills at a single rate, the uplink
    energy is convex in the split; its optimum equalizes the marginal power
    f'(rate)/|h|^2 across users carrying shared bits (waterfilling on the
    marginal price).  With well-separated channels this lands on the
    one-carrier corner; near ties it splits, which strictly dominates
    forcing a single carrier.  Returns splits with shape (len(m), U).
    """
    m = np.asarray(m, dtype=float)
    k = m.size
    if scenario.D_S == 0:
        return np.zeros((k, scenario.U))
    w, n0 = scenario.W_ul_user, scenario.N0_ul
    a = n0 * LN2 / w
    m_col = m[:, None]
    # log marginal price of user u at zero shared share
    log_m0 = np.log(a / scenario.h_sq) + bar_d * LN2 / (w * m_col)   # (k, U)

    def shares(log_theta):
        z = log_theta[:, None] - np.log(a / scenario.h_sq)
        r = w / LN2 * np.maximum(z, 0.0)
        return np.maximum(m_col * r - bar_d, 0.0)

    lo = np.min(log_m0, axis=1) - 1.0
    hi = np.max(log_m0, axis=1) + scenario.D_S * LN2 / (w * m) + 1.0
    for _ in range(70):
        mid = 0.5 * (lo + hi)
        too_low = np.sum(shares(mid), axis=1) < scenario.D_S
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
    split = shares(hi)
    total = np.sum(split, axis=1, keepdims=True)
    return split * (scenario.D_S / np.where(total > 0, total, 1.0))


def _recover_primal(scenario: Scenario, d_local: np.ndarray):
    """Feasible allocation from fixed local bits, everything else re-optimized.

    All users share one uplink window M (the latency bound is common), each
    filling it at a single rate with the shared split waterfilled; the
    downlink window T - t_sdl - M is then filled by the cheapest decoding
    times meeting the BS budget.  Total energy is convex in M, so a
    scan-and-refine search over M certifies the split to high precision.
    """
    sys = scenario.sys
    t_sdl = model.downlink_shared_latency(scenario)
    b_tot = sys.T_max - t_sdl
    if b_tot <= 0:
        raise InfeasibleScenarioError("shared multicast alone exceeds T_max")

    d_local = np.minimum(np.asarray(d_local, float), scenario.local_bits_cap())
    d_local = np.maximum(d_local, 0.0)
    bar_d = scenario.indiv_bits(d_local)
    dl_bits = sys.a0 * bar_d
    n0, w = scenario.N0_ul, scenario.W_ul_user

    has_ul = bool(np.any(bar_d > 0)) or scenario.D_S > 0
    has_dl = bool(np.any(dl_bits > 0))

    if has_dl:
        def bse_at(c):
            t = np.where(dl_bits > 0, c, 0.0)
            return float(np.sum(model.tx_energy(dl_bits, t, scenario.g_sq,
                                                scenario.N0_dl, scenario.W_dl_user)))
        if bse_at(b_tot * (1 - 1e-12)) > sys.E_max:
            raise InfeasibleScenarioError(
                "BS energy budget cannot deliver the required results in time")
        c_min = _bisect_decreasing(lambda c: bse_at(c) - sys.E_max,
                                   b_tot * 1e-15, b_tot * (1 - 1e-12))
        m_hi = b_tot - c_min
    else:
        m_hi = b_tot

    def ul_energy(mg):
        split = _waterfill_split(scenario, bar_d, mg)
        e = np.sum(model.tx_energy(split + bar_d, mg[:, None], scenario.h_sq,
                                   n0, w), axis=1)
        return e, split

    if not has_ul:
        m_star = 0.0
    else:
        lo, hi = min(1e-9 * b_tot, m_hi), m_hi
        m_star = m_hi
        for _ in range(9):
            mg = np.linspace(lo, hi, 17)
            e_ul, _ = ul_energy(mg)
            dec, _ = _decode_min(scenario, dl_bits, b_tot - mg)
            i = int(np.argmin(e_ul + dec))
            m_star = float(mg[i])
            lo, hi = float(mg[max(i - 1, 0)]), float(mg[min(i + 1, 16)])

    dec, t_dl = _decode_min(scenario, dl_bits, np.array([b_tot - m_star]))
    if not np.isfinite(dec[0]):
        raise InfeasibleScenarioError("downlink budget infeasible at recovery")
    t_dl = t_dl[0]
    split = _waterfill_split(scenario, bar_d, np.array([m_star]))[0]
    ul_bits = split + bar_d
    with np.errstate(invalid="ignore"):
        frac = np.where(ul_bits > 0, split / np.where(ul_bits > 0, ul_bits, 1.0), 0.0)
    t_us = m_star * frac
    t_ui = np.where(bar_d > 0, m_star * (1.0 - frac), 0.0)
    alloc = Allocation(t_us, t_ui, t_dl, float(np.max(t_dl, initial=0.0)),
                       np.full(scenario.U, sys.T_max), d_local, split)
    return alloc, model.total_energy(scenario, alloc)


def check_scenario_feasible(scenario: Scenario):
    """Raise InfeasibleScenarioError when no allocation can meet the budgets."""
    sys = scenario.sys
    t_sdl = model.downlink_shared_latency(scenario)
    reasons = []
    if t_sdl >= sys.T_max * (1 - 1e-9):
        reasons.append("shared multicast alone exceeds the latency budget")
    forced = np.maximum(scenario.D_I - scenario.D_S - scenario.local_bits_cap(), 0.0)
    if not reasons and np.any(forced > 0):
        c = (sys.T_max - t_sdl) * (1 - 1e-9)
        t = np.where(forced > 0, c, 0.0)
        e = float(np.sum(model.tx_energy(sys.a0 * forced, t, scenario.g_sq,
                                         scenario.N0_dl, scenario.W_dl_user)))
        if e > sys.E_max:
            reasons.append("BS energy budget too small for the mandatory downloads")
    if reasons:
        raise InfeasibleScenarioError(reasons)


def solve(scenario: Scenario, opts: SolverOptions | None = None,
          pin_local_zero: bool = False) -> SolveReport:
    """Maximize the dual by the ellipsoid method and recover a primal plan.

    Feasibility cuts handle negative multipliers; otherwise the supergradient
    of the dual function cuts the ellipsoid.  Stops once the cut bound
    sqrt(s'Ps) certifies the best dual value to eps_stop, then re-evaluates
    the dual at the best point and rebuilds a feasible allocation from its
    bit decisions.  With ``pin_local_zero`` the local-bits branch is removed
    (the full-offload restriction).
    """
    opts = opts or SolverOptions()
    check_scenario_feasible(scenario)
    ctx = _Ctx(scenario, pin_local_zero)
    U = ctx.U

    scale_parts = [np.full(U, ctx.T)]
    if not pin_local_zero:
        scale_parts.append(ctx.cycle_cap)
    scale_parts.append(np.full(U, ctx.T))
    scale_parts.append([scenario.sys.E_max])
    scales = np.concatenate(scale_parts)
    dim = scales.size

    def unpack(z):
        d = z / scales
        beta = d[:U]
        if pin_local_zero:
            omega = np.zeros(U)
            sigma = d[U:2 * U]
            nu = float(d[2 * U])
        else:
            omega = d[U:2 * U]
            sigma = d[2 * U:3 * U]
            nu = float(d[3 * U])
        return beta, omega, sigma, nu

    max_iters = opts.max_iters if opts.max_iters is not None else 500 * dim * dim
    state = EllipsoidState(center=np.ones(dim),
                           shape_matrix=np.eye(dim) * opts.radius**2,
                           iteration=0, best_dual=-math.inf, best_point=None)
    best_z = state.center.copy()
    trace: list[tuple[int, float, float]] = []
    converged = False

    while state.iteration < max_iters:
        state.iteration += 1
        z, P = state.center, state.shape_matrix
        i_min = int(np.argmin(z))
        if z[i_min] < 0.0:
            a = np.zeros(dim)
            a[i_min] = -1.0
        else:
            beta, omega, sigma, nu = unpack(z)
            value, _parts, grads, _delta = _eval_raw(
                ctx, beta, omega, sigma, nu, opts.eps_dual)
            if pin_local_zero:
                raw = np.concatenate([grads[0], grads[2], [grads[3]]])
            else:
                raw = np.concatenate([grads[0], grads[1], grads[2], [grads[3]]])
            s = raw / scales
            if value > state.best_dual:
                state.best_dual = value
                state.best_point = DualPoint(*unpack(z))
                best_z = z.copy()
            bound = math.sqrt(max(float(s @ (P @ s)), 0.0))
            trace.append((state.iteration, value, bound))
            if bound <= opts.eps_stop * max(1.0, abs(state.best_dual)):
                converged = True
                break
            a = -s
        pa = P @ a
        denom2 = float(a @ pa)
        if not math.isfinite(denom2) or denom2 <= 0.0:
            break
        gn = pa / math.sqrt(denom2)
        state.center = z - gn / (dim + 1.0)
        P = (dim * dim / (dim * dim - 1.0)) * (P - (2.0 / (dim + 1.0)) * np.outer(gn, gn))
        state.shape_matrix = 0.5 * (P + P.T)

    best_val = state.best_dual
    iteration = state.iteration
    beta, omega, sigma, nu = unpack(best_z)
    beta = np.maximum(beta, opts.eps_dual)
    nu = max(nu, opts.eps_dual)
    dual = DualPoint(beta, omega, sigma, nu)
    _value, parts, _grads, _delta = _eval_raw(ctx, beta, omega, sigma, nu,
                                              opts.eps_dual)
    d_local = parts[4]
    alloc, primal = _recover_primal(scenario, d_local)
    gap = primal - best_val
    rel_gap = gap / max(best_val, opts.rel_gap_floor)
    residuals = kkt_residuals(scenario, alloc, dual)
    return SolveReport(alloc, primal, best_val, rel_gap, residuals,
                       iteration, trace, dual, converged)


def kkt_residuals(scenario: Scenario, alloc: Allocation, dual: DualPoint):
    """Primal/dual feasibility and complementary-slackness residuals.

    Feasibility entries are normalized by each constraint's natural scale;
    complementarity entries are |multiplier * slack| in joules.
    """
    sys = scenario.sys
    t_sdl = model.downlink_shared_latency(scenario)
    ul_tot = alloc.t_ul_shared + alloc.t_ul_ind
    lat_rhs = sys.T_max - t_sdl - alloc.t_dl_aux
    bse = model.bs_downlink_energy(scenario, alloc)
    cycles = sys.lambda0 * alloc.D_L
    d_cap = scenario.D_I - scenario.D_S

    res = {
        "primal-latency": float(np.max((ul_tot - lat_rhs) / sys.T_max, initial=0.0)),
        "primal-aux-dl": float(np.max((alloc.t_dl_ind - alloc.t_dl_aux) / sys.T_max,
                                      initial=0.0)),
        "primal-bs-energy": max((bse - sys.E_max) / sys.E_max, 0.0),
        "primal-local-bits": float(np.max(
            (cycles - alloc.t_local * scenario.f_max) / (sys.T_max * scenario.f_max),
            initial=0.0)),
        "primal-local-range": float(np.max(
            np.maximum(-alloc.D_L, alloc.D_L - d_cap) / np.maximum(scenario.D_I, 1.0),
            initial=0.0)),
        "primal-shared-split": abs(float(np.sum(alloc.D_S_split)) - scenario.D_S)
        / max(scenario.D_S, 1.0),
        "primal-nonneg": float(np.max(np.concatenate(
            [-alloc.t_ul_shared, -alloc.t_ul_ind, -alloc.t_dl_ind,
             [-alloc.t_dl_aux], -alloc.D_S_split]) / sys.T_max, initial=0.0)),
        "dual-nonneg": max(0.0, -min(dual.nu,
                                     float(dual.beta.min(initial=0.0)),
                                     float(dual.omega.min(initial=0.0)),
                                     float(dual.sigma.min(initial=0.0)))),
        "comp-latency": float(np.max(np.abs(dual.beta * (lat_rhs - ul_tot)),
                                     initial=0.0)),
        "comp-local-bits": float(np.max(
            np.abs(dual.omega * (alloc.t_local * scenario.f_max - cycles)),
            initial=0.0)),
        "comp-aux-dl": float(np.max(
            np.abs(dual.sigma * (alloc.t_dl_aux - alloc.t_dl_ind)), initial=0.0)),
        "comp-bs-energy": abs(dual.nu * (sys.E_max - bse)),
    }
    return res


def trace_to_csv(report: SolveReport) -> str:
    """Iteration trace as CSV text: iteration, dual_value, gap_bound."""
    lines = ["iteration,dual_value,gap_bound"]
    for it, val, bound in report.trace:
        lines.append(f"{it},{val!r},{bound!r}")
    return "\n".join(lines) + "\n"
