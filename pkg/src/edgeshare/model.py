"""System model: domain types and pure evaluators.

Everything here is side-effect free and works in SI units throughout
(bits, Hz, W, s, J, cycles).  Per-user quantities are numpy arrays indexed
by user; scalar helpers accept floats or arrays and broadcast.

Conventions for degenerate slots (closure points of the perspective
function t*f(b/t)):

* zero bits in a slot cost zero energy for any time t >= 0;
* positive bits with zero time signal an infeasible slot and evaluate to
  ``inf`` rather than raising or returning NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LN2 = math.log(2.0)


class InfeasibleScenarioError(Exception):
    """Scenario cannot satisfy its constraints; carries named reasons."""

    def __init__(self, reasons):
        if isinstance(reasons, str):
            reasons = [reasons]
        self.reasons = list(reasons)
        super().__init__("; ".join(self.reasons))


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def noise_power(noise_density_dbm_hz: float, bandwidth_hz) -> float:
    """AWGN power over a band: density (dBm/Hz) integrated over bandwidth (Hz)."""
    if np.any(np.asarray(bandwidth_hz) <= 0):
        raise ValueError("bandwidth must be positive")
    return dbm_to_watts(noise_density_dbm_hz) * bandwidth_hz


def pathloss_gain(distance_km):
    """Linear channel power gain at distance d km: PL(dB) = 128.1 + 37.6*log10(d)."""
    d = np.asarray(distance_km, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    pl_db = 128.1 + 37.6 * np.log10(d)
    out = 10.0 ** (-pl_db / 10.0)
    return float(out) if np.ndim(distance_km) == 0 else out


def f_power(rate, bandwidth: float, noise: float):
    """Transmit power sustaining `rate` over `bandwidth` against `noise`.

    f(x) = N0*(2**(x/W) - 1); strictly convex and increasing with f(0) = 0.
    """
    return noise * np.expm1(np.asarray(rate, dtype=float) / bandwidth * LN2)


def f_power_deriv(rate, bandwidth: float, noise: float):
    """d f_power / d rate."""
    return noise * LN2 / bandwidth * np.exp(np.asarray(rate, dtype=float) / bandwidth * LN2)


def tx_energy(bits, t, gain, noise: float, bandwidth: float):
    """Perspective-form transmission energy (t/gain)*f(bits/t).

    Zero bits cost nothing for any t >= 0; positive bits at t = 0 give inf.
    """
    b = np.asarray(bits, dtype=float)
    t_ = np.asarray(t, dtype=float)
    g = np.asarray(gain, dtype=float)
    safe_t = np.where(t_ > 0, t_, 1.0)
    with np.errstate(over="ignore"):
        e = safe_t / g * f_power(b / safe_t, bandwidth, noise)
    e = np.where(b <= 0, 0.0, e)
    e = np.where((b > 0) & (t_ <= 0), np.inf, e)
    if np.ndim(e) == 0:
        return float(e)
    return e


def local_energy(sys: "SystemParams", D_L, t_local):
    """CPU energy kappa0*(lambda0*D_L)**3 / t_local**2 with the zero-bit convention."""
    d = np.asarray(D_L, dtype=float)
    t = np.asarray(t_local, dtype=float)
    safe_t = np.where(t > 0, t, 1.0)
    e = sys.kappa0 * (sys.lambda0 * d) ** 3 / safe_t**2
    e = np.where(d <= 0, 0.0, e)
    e = np.where((d > 0) & (t <= 0), np.inf, e)
    if np.ndim(e) == 0:
        return float(e)
    return e


@dataclass
class SystemParams:
    """Global constants shared by all users in a scenario."""

    W_ul: float = 10e6          # Hz, total uplink bandwidth (split evenly by FDMA)
    W_dl: float = 10e6          # Hz, total downlink bandwidth
    noise_density: float = -169.0   # dBm/Hz, AWGN one-sided density
    P_max: float = 1.0          # W, BS multicast transmit power
    E_max: float = 0.002        # J, BS energy budget for individual downloads
    T_max: float = 0.02         # s, end-to-end latency budget
    kappa0: float = 1e-26       # J*s^2/cycle^3, CPU energy coefficient
    lambda0: float = 1e3        # cycles/bit
    a0: float = 1.0             # output bits per input bit
    F: float = 5e12             # cycles/s, cloudlet computing frequency
    num_users: int = 10

    def __post_init__(self):
        for name in ("W_ul", "W_dl", "P_max", "E_max", "T_max", "kappa0",
                     "lambda0", "a0", "F"):
            if getattr(self, name) <= 0:
                raise ValueError(f"SystemParams.{name} must be strictly positive")
        if self.num_users < 1:
            raise ValueError("SystemParams.num_users must be >= 1")


@dataclass
class UserParams:
    """Per-user inputs."""

    D_I: float                  # bits, total input data
    h_sq: float                 # uplink linear power gain |h|^2
    g_sq: float                 # downlink linear power gain |g|^2
    rho_dl: float = 0.625       # J/s, receive/decode energy rate
    f_max: float = 1e9          # cycles/s, local CPU cap
    distance_km: float | None = None   # only used to derive gains via pathloss

    def __post_init__(self):
        if self.D_I < 0:
            raise ValueError("UserParams.D_I must be nonnegative")
        if self.h_sq <= 0 or self.g_sq <= 0:
            raise ValueError("channel gains must be strictly positive")
        if self.rho_dl < 0:
            raise ValueError("UserParams.rho_dl must be nonnegative")
        if self.f_max <= 0:
            raise ValueError("UserParams.f_max must be strictly positive")

    @classmethod
    def at_distance(cls, D_I: float, distance_km: float, **kwargs) -> "UserParams":
        gain = pathloss_gain(distance_km)
        return cls(D_I=D_I, h_sq=gain, g_sq=gain, distance_km=distance_km, **kwargs)


@dataclass(eq=False)
class Scenario:
    """A system instance: global constants, users, and the shared data size."""

    sys: SystemParams
    users: list[UserParams]
    D_S: float = 0.0            # bits of input identical across all users

    def __post_init__(self):
        if len(self.users) != self.sys.num_users:
            raise ValueError(
                f"expected {self.sys.num_users} users, got {len(self.users)}")
        self.D_I = np.array([u.D_I for u in self.users], dtype=float)
        self.h_sq = np.array([u.h_sq for u in self.users], dtype=float)
        self.g_sq = np.array([u.g_sq for u in self.users], dtype=float)
        self.rho_dl = np.array([u.rho_dl for u in self.users], dtype=float)
        self.f_max = np.array([u.f_max for u in self.users], dtype=float)
        if self.D_S < 0:
            raise ValueError("D_S must be nonnegative")
        if self.D_S > self.D_I.min() * (1 + 1e-12):
            raise ValueError("D_S exceeds the smallest user input size")

    @property
    def U(self) -> int:
        return len(self.users)

    @property
    def W_ul_user(self) -> float:
        return self.sys.W_ul / self.U

    @property
    def W_dl_user(self) -> float:
        return self.sys.W_dl / self.U

    @property
    def N0_ul(self) -> float:
        return noise_power(self.sys.noise_density, self.W_ul_user)

    @property
    def N0_dl(self) -> float:
        return noise_power(self.sys.noise_density, self.W_dl_user)

    def indiv_bits(self, D_L) -> np.ndarray:
        """Exclusively offloaded input bits per user: D_I - D_S - D_L."""
        return self.D_I - self.D_S - np.asarray(D_L, dtype=float)

    def local_bits_cap(self) -> np.ndarray:
        """Upper bound on local bits: min(D_I - D_S, T_max*f_max/lambda0)."""
        return np.minimum(self.D_I - self.D_S,
                          self.sys.T_max * self.f_max / self.sys.lambda0)


@dataclass
class Allocation:
    """Decision variables of one offloading plan (arrays indexed by user)."""

    t_ul_shared: np.ndarray     # s, shared-data upload slot
    t_ul_ind: np.ndarray        # s, individual-data upload slot
    t_dl_ind: np.ndarray        # s, individual-result download slot
    t_dl_aux: float             # s, auxiliary common bound on t_dl_ind
    t_local: np.ndarray         # s, local computing window
    D_L: np.ndarray             # bits computed locally
    D_S_split: np.ndarray       # bits of shared data uploaded by each user

    @classmethod
    def zeros(cls, num_users: int) -> "Allocation":
        z = lambda: np.zeros(num_users)
        return cls(z(), z(), z(), 0.0, z(), z(), z())


@dataclass
class DualPoint:
    """Nonnegative multipliers for latency, local-bits, aux-download and BS-energy."""

    beta: np.ndarray
    omega: np.ndarray
    sigma: np.ndarray
    nu: float

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.beta.min(initial=0.0) < 0 or self.omega.min(initial=0.0) < 0 \
                or self.sigma.min(initial=0.0) < 0 or self.nu < 0:
            raise ValueError("dual variables must be nonnegative")


@dataclass
class SolveReport:
    """Solver output: allocation plus optimality certificates."""

    allocation: Allocation
    primal_value: float         # J, energy of the recovered feasible allocation
    dual_value: float           # J, best lower bound found
    rel_gap: float
    kkt_residuals: dict[str, float]
    iterations: int
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    dual: DualPoint | None = None
    converged: bool = True


def uplink_energy_shared(scenario: Scenario, u: int, t: float, bits: float) -> float:
    """Energy user u spends uploading `bits` of shared data in time t."""
    return tx_energy(bits, t, scenario.h_sq[u], scenario.N0_ul, scenario.W_ul_user)


def uplink_energy_individual(scenario: Scenario, u: int, t: float, bits: float) -> float:
    """Energy user u spends uploading `bits` of exclusive data in time t."""
    return tx_energy(bits, t, scenario.h_sq[u], scenario.N0_ul, scenario.W_ul_user)


def downlink_shared_rate(scenario: Scenario) -> np.ndarray:
    """Per-user achievable multicast rate at BS power P_max."""
    snr = scenario.sys.P_max * scenario.g_sq / scenario.N0_dl
    return scenario.W_dl_user * np.log2(1.0 + snr)


def downlink_shared_times(scenario: Scenario) -> np.ndarray:
    """Per-user time to receive the a0*D_S multicast result bits."""
    if scenario.D_S == 0:
        return np.zeros(scenario.U)
    return scenario.sys.a0 * scenario.D_S / downlink_shared_rate(scenario)


def downlink_shared_time(scenario: Scenario, u: int) -> float:
    return float(downlink_shared_times(scenario)[u])


def downlink_shared_latency(scenario: Scenario) -> float:
    """Multicast completes only once the slowest user has received it."""
    return float(np.max(downlink_shared_times(scenario), initial=0.0))


def bs_downlink_energy(scenario: Scenario, alloc: Allocation) -> float:
    """BS energy for unicasting the individual results (budgeted by E_max)."""
    bits = scenario.sys.a0 * scenario.indiv_bits(alloc.D_L)
    e = tx_energy(bits, alloc.t_dl_ind, scenario.g_sq, scenario.N0_dl,
                  scenario.W_dl_user)
    return float(np.sum(e))


def total_latency(scenario: Scenario, alloc: Allocation, t_S_C: float = 0.0,
                  t_u_C=None) -> np.ndarray:
    """Per-user completion time with explicit cloudlet computing intervals.

    Shared computing starts once every shared upload is in; a user's
    individual computing starts after both its own upload and the shared
    computing finish; the multicast starts after shared computing and all
    uploads complete; a user's unicast starts after its computing result and
    the multicast are done.
    """
    if t_u_C is None:
        t_u_C = np.zeros(scenario.U)
    t_u_C = np.asarray(t_u_C, dtype=float)
    ul_done = alloc.t_ul_shared + alloc.t_ul_ind
    shared_computed = np.max(alloc.t_ul_shared, initial=0.0) + t_S_C
    indiv_computed = np.maximum(ul_done, shared_computed) + t_u_C
    multicast_start = max(shared_computed, np.max(ul_done, initial=0.0))
    multicast_done = multicast_start + downlink_shared_latency(scenario)
    return np.maximum(indiv_computed, multicast_done) + alloc.t_dl_ind


def simplified_latency(scenario: Scenario, alloc: Allocation) -> np.ndarray:
    """Latency with cloudlet computing treated as instantaneous."""
    ul_window = np.max(alloc.t_ul_shared + alloc.t_ul_ind, initial=0.0)
    return ul_window + downlink_shared_latency(scenario) + alloc.t_dl_ind


def total_energy(scenario: Scenario, alloc: Allocation) -> float:
    """Total mobile-side energy: local CPU + uploads + result decoding."""
    return float(np.sum(per_user_energy(scenario, alloc)))


def per_user_energy(scenario: Scenario, alloc: Allocation) -> np.ndarray:
    n0, w = scenario.N0_ul, scenario.W_ul_user
    e_local = local_energy(scenario.sys, alloc.D_L, alloc.t_local)
    e_ul_s = tx_energy(alloc.D_S_split, alloc.t_ul_shared, scenario.h_sq, n0, w)
    e_ul_i = tx_energy(scenario.indiv_bits(alloc.D_L), alloc.t_ul_ind,
                       scenario.h_sq, n0, w)
    e_dl = (downlink_shared_times(scenario) + alloc.t_dl_ind) * scenario.rho_dl
    return e_local + e_ul_s + e_ul_i + e_dl


def check_feasible(scenario: Scenario, alloc: Allocation, tol: float = 1e-9):
    """Evaluate every constraint; return [(name, normalized violation)] above tol."""
    sys = scenario.sys
    out = []

    def check(name, violation):
        v = float(np.max(violation, initial=0.0))
        if v > tol:
            out.append((name, v))

    lat = simplified_latency(scenario, alloc)
    check("latency", (lat - sys.T_max) / sys.T_max)
    ul_tot = alloc.t_ul_shared + alloc.t_ul_ind
    aux_rhs = sys.T_max - downlink_shared_latency(scenario) - alloc.t_dl_aux
    check("latency-aux", (ul_tot - aux_rhs) / sys.T_max)
    check("aux-dl", (alloc.t_dl_ind - alloc.t_dl_aux) / sys.T_max)
    check("bs-energy", (bs_downlink_energy(scenario, alloc) - sys.E_max) / sys.E_max)
    check("local-time", (alloc.t_local - sys.T_max) / sys.T_max)
    cycles_cap = alloc.t_local * scenario.f_max
    check("local-bits",
          (sys.lambda0 * alloc.D_L - cycles_cap) / (sys.T_max * scenario.f_max))
    d_cap = scenario.D_I - scenario.D_S
    check("local-bits-range",
          np.maximum(-alloc.D_L, alloc.D_L - d_cap) / np.maximum(scenario.D_I, 1.0))
    split_scale = max(scenario.D_S, 1.0)
    check("shared-split", abs(np.sum(alloc.D_S_split) - scenario.D_S) / split_scale)
    check("shared-split-nonneg", -alloc.D_S_split / split_scale)
    times = np.concatenate([alloc.t_ul_shared, alloc.t_ul_ind, alloc.t_dl_ind,
                            alloc.t_local, [alloc.t_dl_aux]])
    check("nonneg-times", -times / sys.T_max)
    return out


def cloudlet_compute_times(scenario: Scenario, alloc: Allocation,
                           eps: float = 0.05):
    """Cloudlet computing intervals plus the instantaneous-computing check.

    Returns (t_S_C, t_u_C, ok) where ok verifies t_S_C <= eps*min_u t_ul_ind
    and t_u_C <= eps*t_dl_shared_u for every user; the cloudlet serves every
    task at its full frequency F.
    """
    sys = scenario.sys
    t_S_C = sys.lambda0 * scenario.D_S / sys.F
    t_u_C = sys.lambda0 * np.maximum(scenario.indiv_bits(alloc.D_L), 0.0) / sys.F
    ok = bool(t_S_C <= eps * np.min(alloc.t_ul_ind, initial=np.inf)
              and np.all(t_u_C <= eps * downlink_shared_times(scenario)))
    return t_S_C, t_u_C, ok
