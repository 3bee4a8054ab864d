"""Scenario configuration files, sweep execution and CSV emission.

Configs are TOML with unit-suffixed quantities ("10 MHz", "0.625 J/s",
"10 kbit"); bare numbers are taken as SI.  An empty file yields the full
default parameter set.  Sweeps vary either the latency budget or the shared
fraction and run any subset of the schemes, deterministically for a given
seed (user placement is drawn once per config).
"""

from __future__ import annotations

import dataclasses
import re
import time
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ImportError:                      # Python 3.10
    import tomli as tomllib

from . import baselines, dual_solver, model
from .dual_solver import SolverOptions
from .model import InfeasibleScenarioError, Scenario, SystemParams, UserParams

SCHEMES = ("proposed", "local_only", "no_shared", "full_offload", "equal_time")
SWEEP_VARIABLES = ("t_max", "shared_fraction")


class ConfigError(ValueError):
    pass


_UNIT_SCALES = {
    "frequency": {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12},
    "bits": {"bit": 1.0, "bits": 1.0, "kbit": 1e3, "kbits": 1e3,
             "mbit": 1e6, "mbits": 1e6},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "energy": {"j": 1.0, "mj": 1e-3, "uj": 1e-6},
    "power": {"w": 1.0, "mw": 1e-3},
    "power_rate": {"j/s": 1.0, "w": 1.0, "mw": 1e-3},
}

_QTY_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*([a-zA-Z/]*)\s*$")


def parse_quantity(value, kind: str, where: str) -> float:
    """Number or 'value unit' string -> SI float; errors carry the field."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected number or quantity string")
    m = _QTY_RE.match(value)
    if not m:
        raise ConfigError(f"{where}: cannot parse quantity {value!r}")
    num, unit = m.groups()
    try:
        x = float(num)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad number in {value!r}") from exc
    if not unit:
        return x
    table = _UNIT_SCALES[kind]
    scale = table.get(unit.lower())
    if scale is None:
        raise ConfigError(
            f"{where}: unit {unit!r} not valid for {kind} "
            f"(accepted: {', '.join(sorted(table))})")
    return x * scale


@dataclass
class SweepSpec:
    variable: str = "t_max"
    values: list[float] = field(default_factory=list)
    schemes: list[str] = field(default_factory=lambda: list(SCHEMES))


@dataclass
class ScenarioConfig:
    sys: SystemParams = field(default_factory=SystemParams)
    input_bits: float = 10e3
    rho_dl: float = 0.625
    f_max: float = 1e9
    distance_range: tuple[float, float] = (0.05, 0.5)
    explicit_users: list[UserParams] | None = None
    shared_fraction: float = 0.4
    seed: int = 1
    solver: SolverOptions = field(default_factory=SolverOptions)
    equal_time_split: str = "equal"
    sweep: SweepSpec = field(default_factory=SweepSpec)


def _get(table, key, where, kind=None, default=None):
    if key not in table:
        return default
    v = table.pop(key)
    if kind is None:
        return v
    return parse_quantity(v, kind, f"{where}.{key}")


def _reject_unknown(table, where):
    if table:
        raise ConfigError(f"{where}: unknown keys {sorted(table)}")


def load_config(path) -> ScenarioConfig:
    """Parse and validate a TOML scenario config, applying all defaults."""
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    cfg = ScenarioConfig()
    system = raw.pop("system", {})
    sys_kw = {}
    for key, attr, kind in (
            ("bandwidth_ul", "W_ul", "frequency"),
            ("bandwidth_dl", "W_dl", "frequency"),
            ("noise_density_dbm_hz", "noise_density", None),
            ("p_max", "P_max", "power"),
            ("e_max", "E_max", "energy"),
            ("t_max", "T_max", "time"),
            ("kappa0", "kappa0", None),
            ("lambda0", "lambda0", None),
            ("a0", "a0", None),
            ("cloudlet_frequency", "F", "frequency"),
            ("num_users", "num_users", None)):
        if key in system:
            v = system.pop(key)
            sys_kw[attr] = v if kind is None else parse_quantity(
                v, kind, f"system.{key}")
    _reject_unknown(system, "system")
    if "E_max" not in sys_kw:
        # BS energy budget scales with the users it serves (0.2 mJ each)
        sys_kw["E_max"] = 2e-4 * sys_kw.get("num_users", 10)
    try:
        cfg.sys = SystemParams(**sys_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"system: {exc}") from exc

    users = raw.pop("users", {})
    cfg.input_bits = _get(users, "input_bits", "users", "bits", cfg.input_bits)
    cfg.rho_dl = _get(users, "rho_dl", "users", "power_rate", cfg.rho_dl)
    cfg.f_max = _get(users, "f_max", "users", "frequency", cfg.f_max)
    if "distance_km" in users:
        rng = users.pop("distance_km")
        if not (isinstance(rng, list) and len(rng) == 2
                and all(isinstance(v, (int, float)) for v in rng)
                and 0 < rng[0] <= rng[1]):
            raise ConfigError("users.distance_km: expected [min, max] in km")
        cfg.distance_range = (float(rng[0]), float(rng[1]))
    explicit = users.pop("explicit", None)
    if explicit is not None:
        cfg.explicit_users = []
        for i, u in enumerate(explicit):
            where = f"users.explicit[{i}]"
            d_i = parse_quantity(u.pop("input_bits", cfg.input_bits), "bits",
                                 where)
            rho = parse_quantity(u.pop("rho_dl", cfg.rho_dl), "power_rate",
                                 where)
            fm = parse_quantity(u.pop("f_max", cfg.f_max), "frequency", where)
            if "distance_km" in u:
                d_km = float(u.pop("distance_km"))
                gain = model.pathloss_gain(d_km)
                h_sq = float(u.pop("h_sq", gain))
                g_sq = float(u.pop("g_sq", gain))
            else:
                d_km = None
                try:
                    h_sq, g_sq = float(u.pop("h_sq")), float(u.pop("g_sq"))
                except KeyError as exc:
                    raise ConfigError(
                        f"{where}: needs distance_km or h_sq and g_sq") from exc
            _reject_unknown(u, where)
            try:
                cfg.explicit_users.append(UserParams(
                    d_i, h_sq, g_sq, rho, fm, distance_km=d_km))
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from exc
        if len(cfg.explicit_users) != cfg.sys.num_users:
            raise ConfigError(
                f"users.explicit: {len(cfg.explicit_users)} entries but "
                f"system.num_users = {cfg.sys.num_users}")
    _reject_unknown(users, "users")

    scn = raw.pop("scenario", {})
    cfg.shared_fraction = float(_get(scn, "shared_fraction", "scenario",
                                     default=cfg.shared_fraction))
    if not 0.0 <= cfg.shared_fraction <= 1.0:
        raise ConfigError("scenario.shared_fraction: must lie in [0, 1]")
    cfg.equal_time_split = _get(scn, "equal_time_split", "scenario",
                                default=cfg.equal_time_split)
    if cfg.equal_time_split not in ("equal", "full-copy"):
        raise ConfigError("scenario.equal_time_split: 'equal' or 'full-copy'")
    _reject_unknown(scn, "scenario")

    sol = raw.pop("solver", {})
    cfg.seed = int(_get(sol, "seed", "solver", default=cfg.seed))
    opts = SolverOptions()
    if "eps_stop" in sol:
        opts.eps_stop = float(sol.pop("eps_stop"))
    if "eps_dual" in sol:
        opts.eps_dual = float(sol.pop("eps_dual"))
    if "radius" in sol:
        opts.radius = float(sol.pop("radius"))
    if "max_iters" in sol:
        mi = int(sol.pop("max_iters"))
        opts.max_iters = None if mi <= 0 else mi
    cfg.solver = opts
    _reject_unknown(sol, "solver")

    swp = raw.pop("sweep", {})
    spec = SweepSpec()
    if "variable" in swp:
        spec.variable = str(swp.pop("variable")).lower()
        if spec.variable not in SWEEP_VARIABLES:
            raise ConfigError(
                f"sweep.variable: expected one of {SWEEP_VARIABLES}")
    if "values" in swp:
        spec.values = [float(v) for v in swp.pop("values")]
        if not spec.values:
            raise ConfigError("sweep.values: must be nonempty")
    else:
        if spec.variable == "t_max":
            spec.values = [round(0.01 * k, 10) for k in range(1, 11)]
        else:
            spec.values = [round(0.1 * k, 10) for k in range(0, 10)]
    if "schemes" in swp:
        spec.schemes = [str(s) for s in swp.pop("schemes")]
        bad = sorted(set(spec.schemes) - set(SCHEMES))
        if bad:
            raise ConfigError(f"sweep.schemes: unknown schemes {bad}")
    if spec.variable == "shared_fraction":
        bad_v = [v for v in spec.values if not 0 <= v <= 1]
        if bad_v:
            raise ConfigError(f"sweep.values: fractions outside [0,1]: {bad_v}")
    elif any(v <= 0 for v in spec.values):
        raise ConfigError("sweep.values: latency budgets must be positive")
    cfg.sweep = spec
    _reject_unknown(swp, "sweep")
    _reject_unknown(raw, "config")
    return cfg


def build_scenario(cfg: ScenarioConfig, t_max: float | None = None,
                   shared_fraction: float | None = None) -> Scenario:
    """Materialize a Scenario; placement is redrawn identically per seed."""
    sys = cfg.sys
    if t_max is not None:
        sys = dataclasses.replace(sys, T_max=t_max)
    if cfg.explicit_users is not None:
        users = list(cfg.explicit_users)
    else:
        rng = np.random.default_rng(cfg.seed)
        dists = rng.uniform(*cfg.distance_range, size=sys.num_users)
        users = [UserParams.at_distance(cfg.input_bits, float(d),
                                        rho_dl=cfg.rho_dl, f_max=cfg.f_max)
                 for d in dists]
    frac = cfg.shared_fraction if shared_fraction is None else shared_fraction
    d_s = frac * min(u.D_I for u in users)
    return Scenario(sys, users, D_S=d_s)


@dataclass
class SweepRow:
    sweep_value: float
    scheme: str
    status: str
    total_energy_j: float | None
    rel_gap: float | None
    iterations: int | None
    per_user_energy_j: list[float] | None
    wall_time_s: float | None = field(default=None, compare=False)


def _run_scheme(scheme: str, scenario: Scenario, cfg: ScenarioConfig):
    if scheme == "proposed":
        rep = dual_solver.solve(scenario, cfg.solver)
        per_user = model.per_user_energy(scenario, rep.allocation)
        return rep.primal_value, rep.rel_gap, rep.iterations, per_user
    if scheme == "local_only":
        res = baselines.local_only(scenario)
        per_user = model.local_energy(scenario.sys, scenario.D_I,
                                      scenario.sys.T_max)
        return res.energy_j, None, None, np.asarray(per_user)
    if scheme == "no_shared":
        res = baselines.no_shared_awareness(scenario, cfg.solver)
        blind = Scenario(scenario.sys, scenario.users, D_S=0.0)
        per_user = model.per_user_energy(blind, res.allocation)
        return (res.energy_j, res.report.rel_gap, res.report.iterations,
                per_user)
    if scheme == "full_offload":
        res = baselines.full_offload_only(scenario, cfg.solver)
        per_user = model.per_user_energy(scenario, res.allocation)
        return (res.energy_j, res.report.rel_gap, res.report.iterations,
                per_user)
    if scheme == "equal_time":
        res = baselines.equal_time(scenario, cfg.equal_time_split)
        per_user = model.per_user_energy(scenario, res.allocation)
        return res.energy_j, None, None, per_user
    raise ValueError(f"unknown scheme {scheme!r}")


def run_sweep(cfg: ScenarioConfig) -> list[SweepRow]:
    """One row per (sweep value, scheme); failures recorded, sweep continues."""
    rows = []
    for value in cfg.sweep.values:
        if cfg.sweep.variable == "t_max":
            scenario = build_scenario(cfg, t_max=value)
        else:
            scenario = build_scenario(cfg, shared_fraction=value)
        for scheme in sorted(cfg.sweep.schemes):
            t0 = time.perf_counter()
            try:
                energy, gap, iters, per_user = _run_scheme(scheme, scenario,
                                                           cfg)
                rows.append(SweepRow(value, scheme, "ok", float(energy),
                                     gap, iters,
                                     [float(e) for e in per_user],
                                     time.perf_counter() - t0))
            except InfeasibleScenarioError:
                rows.append(SweepRow(value, scheme, "infeasible", None, None,
                                     None, None, time.perf_counter() - t0))
            except Exception:
                rows.append(SweepRow(value, scheme, "error", None, None,
                                     None, None, time.perf_counter() - t0))
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(rows: list[SweepRow], path) -> None:
    """Deterministic CSV: fixed header, shortest round-trip floats.

    Wall-clock timing is deliberately not emitted so identical configs and
    seeds produce byte-identical files.
    """
    num_users = max((len(r.per_user_energy_j) for r in rows
                     if r.per_user_energy_j), default=0)
    header = ["sweep_value", "scheme", "status", "total_energy_J", "rel_gap",
              "iterations"] + [f"energy_user_{u + 1}_J"
                               for u in range(num_users)]
    ordered = sorted(rows, key=lambda r: (r.sweep_value, r.scheme))
    lines = [",".join(header)]
    for r in ordered:
        per = r.per_user_energy_j or []
        cells = [_fmt(r.sweep_value), r.scheme, r.status,
                 _fmt(r.total_energy_j), _fmt(r.rel_gap), _fmt(r.iterations)]
        cells += [_fmt(per[u]) if u < len(per) else ""
                  for u in range(num_users)]
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    with open(path, "w", newline="") as fh:
        fh.write(text)


def parse_csv(path) -> list[SweepRow]:
    """Inverse of emit_csv (wall time is not recoverable)."""
    with open(path, newline="") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    n_user = sum(1 for h in header if h.startswith("energy_user_"))
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        rec = dict(zip(header, cells))
        per = [rec[f"energy_user_{u + 1}_J"] for u in range(n_user)]
        per_f = [float(v) for v in per if v != ""]
        rows.append(SweepRow(
            float(rec["sweep_value"]), rec["scheme"], rec["status"],
            float(rec["total_energy_J"]) if rec["total_energy_J"] else None,
            float(rec["rel_gap"]) if rec["rel_gap"] else None,
            int(rec["iterations"]) if rec["iterations"] else None,
            per_f if per_f else None))
    return rows
