"""Command-line front end: solve one scenario, run sweeps, verify vs oracle.

Exit codes: 0 success, 2 infeasible scenario, 1 any other error.
"""

from __future__ import annotations

import argparse
import sys as _sys

import numpy as np

from . import config, dual_solver, model, oracle
from .model import InfeasibleScenarioError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="edgeshare",
                description="Energy-minimal multi-user edge offloading with "
                            "shared input data")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="TOML scenario config")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--tol", type=float, default=None,
                        help="override solver stop tolerance (eps_stop)")
        sp.add_argument("--max-iters", type=int, default=None,
                        help="override solver iteration cap")

    sp = sub.add_parser("solve", help="solve one scenario and print a report")
    common(sp)
    sp.add_argument("--scheme", default="proposed", choices=config.SCHEMES)

    sp = sub.add_parser("sweep", help="run the configured sweep, emit CSV")
    common(sp)
    sp.add_argument("--out", required=True, help="CSV output path")

    sp = sub.add_parser("verify", help="cross-check the solver against the "
                                       "grid oracle (needs <= 3 users)")
    common(sp)
    sp.add_argument("--resolution", type=int, default=9)
    return p


def _load(args) -> config.ScenarioConfig:
    cfg = config.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.tol is not None:
        cfg.solver.eps_stop = args.tol
    if args.max_iters is not None:
        cfg.solver.max_iters = args.max_iters if args.max_iters > 0 else None
    return cfg


def _cmd_solve(args) -> int:
    cfg = _load(args)
    scenario = config.build_scenario(cfg)
    if args.scheme == "proposed":
        rep = dual_solver.solve(scenario, cfg.solver)
        alloc, energy = rep.allocation, rep.primal_value
        print("scheme          proposed")
        print(f"total energy    {energy:.6e} J")
        print(f"dual bound      {rep.dual_value:.6e} J")
        print(f"relative gap    {rep.rel_gap:.3e}")
        print(f"iterations      {rep.iterations}")
        worst = max(rep.kkt_residuals.values())
        print(f"max KKT resid   {worst:.3e}")
    else:
        energy, gap, iters, _per = config._run_scheme(args.scheme, scenario,
                                                      cfg)
        res_scenario = scenario
        if args.scheme == "no_shared":
            res_scenario = model.Scenario(scenario.sys, scenario.users, 0.0)
        alloc = None
        print(f"scheme          {args.scheme}")
        print(f"total energy    {energy:.6e} J")
        if gap is not None:
            print(f"relative gap    {gap:.3e}")
    if args.scheme == "proposed":
        per = model.per_user_energy(scenario, alloc)
        carriers = np.nonzero(alloc.D_S_split > 0)[0]
        names = ", ".join(f"user {c + 1}" for c in carriers)
        print(f"shared carrier  {names if carriers.size else 'none (D_S = 0)'}")
        t_s_c, _t_u_c, ok = model.cloudlet_compute_times(scenario, alloc)
        print(f"cloudlet check  {'ok' if ok else 'violated'} "
              f"(shared compute {t_s_c:.2e} s)")
        print("per-user energy (J):")
        for u, e in enumerate(per):
            print(f"  user {u + 1:<3d} {e:.6e}  local_bits={alloc.D_L[u]:.1f}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    rows = config.run_sweep(cfg)
    config.emit_csv(rows, args.out)
    for r in sorted(rows, key=lambda r: (r.sweep_value, r.scheme)):
        e = "" if r.total_energy_j is None else f"{r.total_energy_j:.6e} J"
        print(f"{cfg.sweep.variable}={r.sweep_value:<8g} {r.scheme:<13s} "
              f"{r.status:<10s} {e}")
    print(f"wrote {args.out}")
    if all(r.status == "infeasible" for r in rows):
        return 2
    return 0


def _cmd_verify(args) -> int:
    cfg = _load(args)
    scenario = config.build_scenario(cfg)
    if scenario.U > 3:
        raise _UsageError("verify needs at most 3 users (grid oracle cost)")
    rep = dual_solver.solve(scenario, cfg.solver)
    res = max(3, args.resolution)
    ok = True
    last = None
    print(f"solver   primal {rep.primal_value:.6e} J, dual bound "
          f"{rep.dual_value:.6e} J, gap {rep.rel_gap:.2e}")
    for r in (res, 2 * res - 1):
        grid = oracle.grid_solve(scenario, r)
        sandwich = rep.dual_value <= grid.best_value * (1 + 1e-9)
        primal_ok = rep.primal_value <= grid.best_value * (1 + 1e-6)
        ok = ok and sandwich and primal_ok
        shrink = "" if last is None else \
            f", gap shrink {last - grid.best_value:+.2e}"
        last = grid.best_value
        print(f"grid r={r:<3d} value {grid.best_value:.6e} J "
              f"(dual<=grid: {sandwich}, primal<=grid: {primal_ok}{shrink})")
    print("verify:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_verify(args)
    except _UsageError as exc:
        print(f"edgeshare: {exc}", file=_sys.stderr)
        return 1
    except InfeasibleScenarioError as exc:
        print(f"edgeshare: infeasible scenario: {exc}", file=_sys.stderr)
        return 2
    except (config.ConfigError, OSError) as exc:
        print(f"edgeshare: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
