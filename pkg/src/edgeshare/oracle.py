"""Independent small-instance verification of the dual solver.

Two solvers that share no code with the dual machinery certify it from both
sides: an exhaustive grid over the bit decisions (times filled by nested
golden-section and bisection searches, never by the Lambert-W closed forms)
and a projected-gradient descent on the full variable set.  Both return
feasible points, so their values upper-bound the optimum, while the dual
value lower-bounds it (the sandwich certificate).

Also provides the analytic gradient of the total energy, validated against
finite differences in the tests before anything else trusts it.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import model
from .model import Allocation, Scenario

LN2 = math.log(2.0)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class OracleMethod(enum.Enum):
    GRID_SEARCH = "grid"
    PROJECTED_GRADIENT = "pgd"


@dataclass
class OracleResult:
    best_value: float
    best_allocation: Allocation
    grid_resolution: tuple[int, ...]
    method: OracleMethod


def energy_gradient(scenario: Scenario, alloc: Allocation):
    """Analytic partials of the total mobile energy at an interior point.

    Derivatives of the perspective terms (t/gain)*f(b/t):
      d/dt = (f(r) - r f'(r))/gain,   d/db = f'(r)/gain,   r = b/t;
    local bits add 3*kappa*lambda^3*D^2/t_loc^2 through the CPU term and
    remove uplink bits; decoding contributes rho per second of download.
    Valid wherever every slot with positive bits has positive time.
    """
    sys = scenario.sys
    n0u, wu = scenario.N0_ul, scenario.W_ul_user
    bar_d = scenario.indiv_bits(alloc.D_L)

    def tx_parts(bits, t, gain, noise, w):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            r = np.where(t > 0, bits / np.where(t > 0, t, 1.0), 0.0)
            f = model.f_power(r, w, noise)
            fp = model.f_power_deriv(r, w, noise)
            d_t = (f - r * fp) / gain
            d_b = fp / gain
        return d_t, d_b

    ds_t, ds_b = tx_parts(alloc.D_S_split, alloc.t_ul_shared, scenario.h_sq,
                          n0u, wu)
    di_t, di_b = tx_parts(bar_d, alloc.t_ul_ind, scenario.h_sq, n0u, wu)
    loc_d = 3.0 * sys.kappa0 * sys.lambda0**3 * alloc.D_L**2 / alloc.t_local**2
    loc_t = -2.0 * sys.kappa0 * (sys.lambda0 * alloc.D_L) ** 3 / alloc.t_local**3
    return {
        "t_ul_shared": ds_t,
        "t_ul_ind": di_t,
        "t_dl_ind": scenario.rho_dl.copy(),
        "t_local": loc_t,
        "D_L": loc_d - di_b,
        "D_S_split": ds_b,
    }


def _compositions(total: float, parts: int, steps: int) -> np.ndarray:
    """All splits of `total` into `parts` on a grid of `steps` increments."""
    if total == 0:
        return np.zeros((1, parts))
    rows = []
    for combo in itertools.product(range(steps + 1), repeat=parts - 1):
        if sum(combo) <= steps:
            rows.append(list(combo) + [steps - sum(combo)])
    return np.array(rows, dtype=float) * (total / steps)


def lp_shared_split_grid(delta: np.ndarray, d_s: float, steps: int = 100):
    """Brute-force minimizer of sum(delta * split) over the split simplex grid.

    Returns (best_split, best_value); ties resolve to the first enumerated
    split, which puts the full load on the lowest-index tied user.
    """
    delta = np.asarray(delta, dtype=float)
    if delta.size > 3:
        raise ValueError("simplex grid oracle supports at most 3 users")
    splits = _compositions(d_s, delta.size, steps)
    # enumerate corners first so argmin tie-breaking favors vertices
    order = np.argsort(-np.max(splits, axis=1), kind="stable")
    splits = splits[order]
    values = splits @ delta
    i = int(np.argmin(values))
    return splits[i], float(values[i])


def _bse_rows(scenario: Scenario, dl_bits: np.ndarray, t: np.ndarray):
    e = model.tx_energy(dl_bits, t, scenario.g_sq, scenario.N0_dl,
                        scenario.W_dl_user)
    return np.sum(e, axis=-1)


def _marginal_dl(scenario: Scenario, dl_bits, t):
    """d/dt of the BS unicast energy: (f(r) - r f'(r))/gain at r = bits/t."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        r = np.where(t > 0, dl_bits / np.where(t > 0, t, 1.0), np.inf)
        f = model.f_power(r, scenario.W_dl_user, scenario.N0_dl)
        fp = model.f_power_deriv(r, scenario.W_dl_user, scenario.N0_dl)
        out = (f - r * fp) / scenario.g_sq
    return np.where(dl_bits > 0, out, 0.0)


def _grid_decode(scenario: Scenario, dl_bits: np.ndarray, caps: np.ndarray,
                 mu_iters: int = 30, t_iters: int = 30):
    """Cheapest decode times under the BS budget, by nested bisection.

    Outer bisection prices the BS budget; the inner one inverts the energy
    derivative per user.  Rows whose caps cannot meet the budget return inf.
    No closed forms involved.  dl_bits: (P, U); caps: (P,).
    """
    sys = scenario.sys
    p, u = dl_bits.shape
    active = dl_bits > 0
    caps_u = np.where(active, caps[:, None], 0.0)
    if not np.any(active):
        return np.zeros(p), np.zeros((p, u))
    feasible = (_bse_rows(scenario, dl_bits, caps_u) <= sys.E_max) & (caps > 0)

    def times_for(log_mu):
        target = -scenario.rho_dl / np.exp(log_mu)[:, None]      # (P, U)
        lo = np.full((p, u), 1e-18)
        hi = caps_u.copy()
        for _ in range(t_iters):
            mid = 0.5 * (lo + hi)
            below = _marginal_dl(scenario, dl_bits, mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return np.where(active, hi, 0.0)

    lo_mu = np.full(p, math.log(1e-30))
    hi_mu = np.full(p, math.log(1e30))
    for _ in range(mu_iters):
        mid = 0.5 * (lo_mu + hi_mu)
        over = _bse_rows(scenario, dl_bits, times_for(mid)) > sys.E_max
        lo_mu = np.where(over, mid, lo_mu)
        hi_mu = np.where(over, hi_mu, mid)
    t = times_for(hi_mu)
    decode = np.sum(scenario.rho_dl * t, axis=1)
    return np.where(feasible, decode, np.inf), t


def _grid_time_fill(scenario: Scenario, ul_bits: np.ndarray,
                    dl_bits: np.ndarray, golden_iters: int = 42):
    """Best common uplink window per bit-combination row, by golden section.

    Every user fills the window (perspective energy decreases with time), so
    one scalar per row fixes the uplink; the remaining latency budget is
    handed to the decode subproblem.  Returns (energy, window, dl_times).
    """
    sys = scenario.sys
    t_sdl = model.downlink_shared_latency(scenario)
    b_tot = sys.T_max - t_sdl
    p = ul_bits.shape[0]
    if b_tot <= 0:
        return np.full(p, np.inf), np.zeros(p), np.zeros_like(dl_bits)
    has_ul = np.any(ul_bits > 0, axis=1)
    has_dl = np.any(dl_bits > 0, axis=1)

    # smallest downlink window that fits the BS budget -> largest M
    c_lo = np.full(p, b_tot * 1e-15)
    c_hi = np.full(p, b_tot * (1 - 1e-12))
    for _ in range(48):
        mid = 0.5 * (c_lo + c_hi)
        t = np.where(dl_bits > 0, mid[:, None], 0.0)
        over = _bse_rows(scenario, dl_bits, t) > sys.E_max
        c_lo = np.where(over, mid, c_lo)
        c_hi = np.where(over, c_hi, mid)
    t_at_hi = np.where(dl_bits > 0, c_hi[:, None], 0.0)
    dl_feasible = _bse_rows(scenario, dl_bits, t_at_hi) <= sys.E_max * (1 + 1e-9)
    m_hi = np.where(has_dl, b_tot - c_hi, b_tot)
    m_hi = np.where(has_ul, m_hi, 0.0)

    def fval(m):
        e_ul = np.sum(model.tx_energy(ul_bits, m[:, None], scenario.h_sq,
                                      scenario.N0_ul, scenario.W_ul_user), axis=1)
        dec, _ = _grid_decode(scenario, dl_bits, b_tot - m)
        return e_ul + dec

    a = np.where(has_ul, 1e-9 * b_tot, 0.0)
    b = np.maximum(m_hi, a)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fval(c), fval(d)
    for _ in range(golden_iters):
        left = fc <= fd                        # keep [a, d], else keep [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - GOLDEN * (b - a)
        d_new = a + GOLDEN * (b - a)
        x_eval = np.where(left, c_new, d_new)
        f_eval = fval(x_eval)
        fc_next = np.where(left, f_eval, fd)   # right rows inherit old d as c
        fd_next = np.where(left, fc, f_eval)   # left rows inherit old c as d
        c_next = np.where(left, c_new, d)
        d_next = np.where(left, c, d_new)
        c, d, fc, fd = c_next, d_next, fc_next, fd_next
    m = 0.5 * (a + b)
    dec, t_dl = _grid_decode(scenario, dl_bits, b_tot - m)
    e_ul = np.sum(model.tx_energy(ul_bits, m[:, None], scenario.h_sq,
                                  scenario.N0_ul, scenario.W_ul_user), axis=1)
    energy = e_ul + dec
    energy = np.where(has_dl & ~dl_feasible, np.inf, energy)
    return energy, m, t_dl


def grid_solve(scenario: Scenario, resolution: int = 9) -> OracleResult:
    """Exhaustive search over local-bits and shared-split grids (U <= 3).

    Times are filled optimally per grid point, so the grid is effectively
    over bit decisions only; the returned value upper-bounds the optimum and
    tightens as the grid refines (finer grids are supersets when resolution
    doubles: 5 -> 9 -> 17).
    """
    if scenario.U > 3:
        raise ValueError("grid oracle limited to 3 users (cost is exponential)")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    sys = scenario.sys
    caps = scenario.local_bits_cap()
    axes = [np.linspace(0.0, caps[u], resolution) for u in range(scenario.U)]
    d_l = np.array(list(itertools.product(*axes)))          # (P1, U)
    splits = _compositions(scenario.D_S, scenario.U, resolution - 1)
    p1, p2 = d_l.shape[0], splits.shape[0]
    d_l_full = np.repeat(d_l, p2, axis=0)
    split_full = np.tile(splits, (p1, 1))

    bar_d = scenario.indiv_bits(d_l_full)
    ul_bits = bar_d + split_full
    dl_bits = sys.a0 * bar_d
    e_fixed = np.sum(model.local_energy(sys, d_l_full, sys.T_max), axis=1) \
        + float(np.sum(model.downlink_shared_times(scenario) * scenario.rho_dl))
    e_link, m, t_dl = _grid_time_fill(scenario, ul_bits, dl_bits)
    total = e_fixed + e_link

    i = int(np.argmin(total))
    m_i = m[i]
    ul_i = ul_bits[i]
    with np.errstate(invalid="ignore"):
        frac = np.where(ul_i > 0, split_full[i] / np.where(ul_i > 0, ul_i, 1.0),
                        0.0)
    alloc = Allocation(
        t_ul_shared=m_i * frac,
        t_ul_ind=np.where(bar_d[i] > 0, m_i * (1 - frac), 0.0),
        t_dl_ind=t_dl[i],
        t_dl_aux=float(np.max(t_dl[i], initial=0.0)),
        t_local=np.full(scenario.U, sys.T_max),
        D_L=d_l_full[i],
        D_S_split=split_full[i],
    )
    return OracleResult(float(model.total_energy(scenario, alloc)), alloc,
                        (resolution,) * scenario.U, OracleMethod.GRID_SEARCH)


def _project_simplex(y: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = total}."""
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - total
    ks = np.arange(1, y.size + 1)
    cond = u - css / ks > 0
    k = ks[cond][-1]
    tau = css[k - 1] / k
    return np.maximum(y - tau, 0.0)


class _PgdSpace:
    """Scaled variable vector [t_us, t_ui, t_dl, D_L, D_S_split] and its sets."""

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        sys = scenario.sys
        u = scenario.U
        self.u = u
        self.t_sdl = model.downlink_shared_latency(scenario)
        self.b_tot = sys.T_max - self.t_sdl
        self.t_scale = sys.T_max
        self.d_scale = np.maximum(scenario.local_bits_cap(), 1.0)
        self.s_scale = max(scenario.D_S, 1.0)
        self.t_floor = 1e-7 * sys.T_max
        self.scales = np.concatenate([np.full(3 * u, self.t_scale),
                                      self.d_scale,
                                      np.full(u, self.s_scale)])

    def unpack(self, x):
        u = self.u
        v = x * self.scales
        return v[:u], v[u:2 * u], v[2 * u:3 * u], v[3 * u:4 * u], v[4 * u:]

    def to_alloc(self, x) -> Allocation:
        t_us, t_ui, t_dl, d_l, split = self.unpack(x)
        return Allocation(t_us, t_ui, t_dl, float(np.max(t_dl, initial=0.0)),
                          np.full(self.u, self.sc.sys.T_max), d_l, split)

    def project(self, x, tol=1e-9, max_cycles=60):
        """Cyclic projections onto boxes, the split simplex, the latency
        half-spaces and the (linearized) BS-energy set.

        Returns (x, ok); ok is False when the cycles did not reach a point
        satisfying every constraint to tolerance, in which case the caller
        must reject the candidate (its objective would not be trustworthy).
        """
        sc, u = self.sc, self.u
        x = x.copy()
        t_lo = self.t_floor / self.t_scale
        t_hi = self.b_tot / self.t_scale
        cap_hi = sc.local_bits_cap() / self.d_scale
        ok = False
        for _ in range(max_cycles):
            x[:3 * u] = np.clip(x[:3 * u], t_lo, t_hi)
            x[3 * u:4 * u] = np.clip(x[3 * u:4 * u], 0.0, cap_hi)
            if sc.D_S > 0:
                x[4 * u:] = _project_simplex(x[4 * u:],
                                             sc.D_S / self.s_scale)
            else:
                x[4 * u:] = 0.0
            # latency: t_us[v] + t_ui[v] + t_dl[w] <= b_tot for every (v, w)
            worst = 0.0
            for v in range(u):
                for w_i in range(u):
                    lhs = x[v] + x[u + v] + x[2 * u + w_i]
                    viol = lhs - t_hi
                    if viol > 0:
                        x[v] -= viol / 3.0
                        x[u + v] -= viol / 3.0
                        x[2 * u + w_i] -= viol / 3.0
                        worst = max(worst, viol)
            x[:3 * u] = np.maximum(x[:3 * u], t_lo)
            alloc = self.to_alloc(x)
            bse = model.bs_downlink_energy(sc, alloc) - sc.sys.E_max
            if math.isfinite(bse) and 0 < bse <= 10.0 * sc.sys.E_max:
                # mild violation: Euclidean projection onto the linearization
                dl_bits = sc.sys.a0 * sc.indiv_bits(alloc.D_L)
                g = np.zeros_like(x)
                g[2 * u:3 * u] = _marginal_dl(sc, dl_bits, alloc.t_dl_ind) \
                    * self.t_scale
                with np.errstate(over="ignore", divide="ignore"):
                    r = np.where(alloc.t_dl_ind > 0,
                                 dl_bits / np.maximum(alloc.t_dl_ind, 1e-300),
                                 0.0)
                    fp = model.f_power_deriv(r, sc.W_dl_user, sc.N0_dl)
                g[3 * u:4 * u] = np.where(dl_bits > 0,
                                          -sc.sys.a0 * fp / sc.g_sq, 0.0) \
                    * self.d_scale
                gn2 = float(g @ g)
                if math.isfinite(gn2) and gn2 > 0:
                    x -= (bse / gn2) * g
                worst = max(worst, bse / sc.sys.E_max)
            elif bse > 0 or not math.isfinite(bse):
                # far outside: stretch download slots (energy is monotone in
                # them), and failing that shift all bits to the local CPUs
                td = x[2 * u:3 * u]

                def bse_scaled(s):
                    a = self.to_alloc(np.concatenate(
                        [x[:2 * u], np.minimum(td * s, t_hi), x[3 * u:]]))
                    return model.bs_downlink_energy(sc, a) - sc.sys.E_max

                s_lo, s_hi = 1.0, 2.0
                grow = 0
                while bse_scaled(s_hi) > 0 and grow < 60:
                    s_lo, s_hi = s_hi, s_hi * 2.0
                    grow += 1
                if bse_scaled(s_hi) > 0:
                    x[3 * u:4 * u] = cap_hi        # all-local fallback
                else:
                    for _ in range(50):
                        mid = 0.5 * (s_lo + s_hi)
                        if bse_scaled(mid) > 0:
                            s_lo = mid
                        else:
                            s_hi = mid
                    x[2 * u:3 * u] = np.minimum(td * s_hi, t_hi)
                worst = max(worst, 1.0)
            if worst <= tol:
                ok = True
                break
        return x, ok


def projected_gradient_solve(scenario: Scenario, step_schedule=0.25,
                             iters: int = 3000) -> OracleResult:
    """Minimize total energy by projected gradient with backtracking.

    Starts from a strictly feasible mostly-local plan; each step follows the
    analytic energy gradient in scaled coordinates and is projected back by
    cyclic projections.  Steps are accepted only if they lower the energy,
    so the accepted-objective sequence is nonincreasing.
    """
    space = _PgdSpace(scenario)
    sys = scenario.sys
    u = scenario.U
    if space.b_tot <= 0:
        raise model.InfeasibleScenarioError("no strictly feasible point exists")

    cap = scenario.local_bits_cap()
    d0 = 0.999 * cap
    x = np.concatenate([
        np.full(u, 0.20 * space.b_tot) / space.t_scale,
        np.full(u, 0.30 * space.b_tot) / space.t_scale,
        np.full(u, 0.45 * space.b_tot) / space.t_scale,
        d0 / space.d_scale,
        np.full(u, scenario.D_S / u) / space.s_scale,
    ])
    x, ok = space.project(x)
    if not ok:
        raise model.InfeasibleScenarioError("no strictly feasible point found")

    def objective(xv):
        return model.total_energy(scenario, space.to_alloc(xv))

    def gradient(xv):
        """Energy gradient reduced to the tangent space of active constraints.

        Components normal to the split-sum equality, a tight BS budget, and
        tight latency half-spaces are removed; stepping along them would be
        undone by the projection anyway (and their magnitudes, rho above all,
        would otherwise drown the useful directions).
        """
        alloc = space.to_alloc(xv)
        parts = energy_gradient(scenario, alloc)
        g = np.concatenate([parts["t_ul_shared"], parts["t_ul_ind"],
                            parts["t_dl_ind"], parts["D_L"],
                            parts["D_S_split"]]) * space.scales
        if scenario.D_S > 0:
            g[4 * u:] -= np.mean(g[4 * u:])
        bse = model.bs_downlink_energy(scenario, alloc)
        if bse >= sys.E_max * (1 - 1e-6):
            dl_bits = sys.a0 * scenario.indiv_bits(alloc.D_L)
            n = np.zeros_like(g)
            n[2 * u:3 * u] = _marginal_dl(scenario, dl_bits, alloc.t_dl_ind) \
                * space.t_scale
            with np.errstate(over="ignore", divide="ignore"):
                r = np.where(alloc.t_dl_ind > 0,
                             dl_bits / np.maximum(alloc.t_dl_ind, 1e-300), 0.0)
                fp = model.f_power_deriv(r, scenario.W_dl_user, scenario.N0_dl)
            n[3 * u:4 * u] = np.where(dl_bits > 0,
                                      -sys.a0 * fp / scenario.g_sq, 0.0) \
                * space.d_scale
            nn = float(n @ n)
            if math.isfinite(nn) and nn > 0:
                g -= (float(g @ n) / nn) * n
        return g

    step0 = step_schedule if isinstance(step_schedule, float) else None
    alpha = step0 if step0 is not None else float(step_schedule(0))
    best_x, best_f = x.copy(), objective(x)
    f_cur = best_f
    g = gradient(x)
    x_prev, g_prev = None, None
    stalls = 0
    for k in range(iters):
        if step0 is None:
            alpha = float(step_schedule(k))
        elif x_prev is not None:
            # spectral (Barzilai-Borwein) step, clamped for safety
            s = x - x_prev
            y = g - g_prev
            sy = float(s @ y)
            if sy > 0:
                alpha = min(max(float(s @ s) / sy, 1e-10), 1e7)
        gn = float(np.linalg.norm(g))
        if gn == 0 or not math.isfinite(gn):
            break
        accepted = False
        trial = alpha
        best_cand, best_fc, best_trial = None, f_cur, None
        for _ in range(50):
            cand, ok = space.project(x - trial * g)
            if ok and objective(cand) < best_fc:
                best_cand, best_fc, best_trial = cand, objective(cand), trial
                break
            trial *= 0.5
            if trial < 1e-16:
                break
        if best_cand is not None:
            # extend the arc while it keeps improving (escapes micro-steps
            # caused by the projection absorbing most of the raw direction)
            for _ in range(16):
                cand, ok = space.project(x - 4.0 * best_trial * g)
                if not ok:
                    break
                fc = objective(cand)
                if fc >= best_fc:
                    break
                best_cand, best_fc, best_trial = cand, fc, 4.0 * best_trial
            x_prev, g_prev = x, g
            x, f_cur = best_cand, best_fc
            g = gradient(x)
            alpha = best_trial
            accepted = True
        if f_cur < best_f:
            best_f, best_x = f_cur, x.copy()
        if not accepted:
            stalls += 1
            if stalls >= 3:
                break
        else:
            stalls = 0
    return OracleResult(best_f, space.to_alloc(best_x), (),
                        OracleMethod.PROJECTED_GRADIENT)
