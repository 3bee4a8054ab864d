import numpy as np
import pytest

import edgeshare.config as config
import edgeshare.model as model
from edgeshare.cli import main
from edgeshare.config import (ConfigError, build_scenario, emit_csv,
                              load_config, parse_csv, parse_quantity,
                              run_sweep)


def _write(tmp_path, text, name="scenario.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_empty_config_gives_reference_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, ""))
    assert cfg.sys.W_ul == 10e6 and cfg.sys.W_dl == 10e6
    assert cfg.sys.P_max == 1.0
    assert cfg.sys.noise_density == -169.0
    assert cfg.sys.lambda0 == 1e3 and cfg.sys.a0 == 1.0
    assert cfg.sys.kappa0 == 1e-26
    assert cfg.sys.num_users == 10
    assert cfg.input_bits == 10e3
    assert cfg.rho_dl == 0.625
    assert cfg.f_max == 1e9
    assert cfg.sys.E_max == pytest.approx(2e-3)


def test_unit_parsing(tmp_path):
    assert parse_quantity("10MHz", "frequency", "x") == 1e7
    assert parse_quantity("10 kbit", "bits", "x") == 1e4
    assert parse_quantity("0.625 J/s", "power_rate", "x") == 0.625
    assert parse_quantity("50 ms", "time", "x") == 0.05
    assert parse_quantity(3.5, "time", "x") == 3.5
    with pytest.raises(ConfigError):
        parse_quantity("10 parsecs", "time", "x")

    cfg = load_config(_write(tmp_path, '[system]\nbandwidth_ul = "10MHz"\n'))
    assert cfg.sys.W_ul == 1e7


def test_validation_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "[scenario]\nshared_fraction = 1.2\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "[system]\nnonsense_key = 1\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, '[sweep]\nvariable = "bananas"\n'))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "not valid toml ==\n"))


def test_build_scenario_deterministic(tmp_path):
    cfg = load_config(_write(tmp_path, "[solver]\nseed = 7\n"))
    s1, s2 = build_scenario(cfg), build_scenario(cfg)
    assert np.array_equal(s1.h_sq, s2.h_sq)
    assert s1.D_S == s2.D_S
    cfg.seed = 8
    s3 = build_scenario(cfg)
    assert not np.array_equal(s1.h_sq, s3.h_sq)


SMALL = """
[system]
num_users = 2
t_max = "20 ms"

[scenario]
shared_fraction = 0.4

[solver]
seed = 3

[sweep]
variable = "shared_fraction"
values = [0.2, 0.6]
schemes = ["proposed", "no_shared"]
"""


def test_run_sweep_rows_and_flat_no_shared(tmp_path):
    cfg = load_config(_write(tmp_path, SMALL))
    rows = run_sweep(cfg)
    assert len(rows) == 4
    assert all(r.status == "ok" for r in rows)
    ns = {r.sweep_value: r.total_energy_j for r in rows
          if r.scheme == "no_shared"}
    # shared-unaware accounting cannot depend on the declared overlap
    assert ns[0.2] == ns[0.6]
    for r in rows:
        assert sum(r.per_user_energy_j) == pytest.approx(r.total_energy_j,
                                                         rel=1e-9)


def test_csv_round_trip_and_determinism(tmp_path):
    cfg = load_config(_write(tmp_path, SMALL))
    rows = run_sweep(cfg)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(rows, p1)
    emit_csv(run_sweep(cfg), p2)
    assert p1.read_bytes() == p2.read_bytes()
    back = parse_csv(p1)
    assert back == sorted(rows, key=lambda r: (r.sweep_value, r.scheme))


def test_csv_empty_rows(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv([], path)
    assert path.read_text() == ("sweep_value,scheme,status,total_energy_J,"
                                "rel_gap,iterations\n")
    assert parse_csv(path) == []


def test_sweep_allocations_feasible(tmp_path):
    cfg = load_config(_write(tmp_path, SMALL))
    scenario = build_scenario(cfg, shared_fraction=0.4)
    for scheme in ("proposed", "full_offload", "equal_time"):
        _energy, _gap, _iters, per = config._run_scheme(scheme, scenario, cfg)
        assert np.all(np.asarray(per) >= 0)


def test_cli_solve_and_exit_codes(tmp_path, capsys):
    path = _write(tmp_path, SMALL)
    assert main(["solve", path]) == 0
    out = capsys.readouterr().out
    assert "total energy" in out and "relative gap" in out

    # multicast alone exceeds the latency budget: infeasible, exit 2
    bad = _write(tmp_path, """
[system]
num_users = 2
t_max = "0.005 ms"

[scenario]
shared_fraction = 0.9
""", name="bad.toml")
    assert main(["solve", bad]) == 2

    assert main(["solve", str(tmp_path / "missing.toml")]) == 1
    assert main(["bogus-command"]) == 1


def test_cli_sweep_writes_csv(tmp_path, capsys):
    path = _write(tmp_path, SMALL)
    out_csv = tmp_path / "rows.csv"
    assert main(["sweep", path, "--out", str(out_csv)]) == 0
    rows = parse_csv(out_csv)
    assert len(rows) == 4
    _ = capsys.readouterr()


def test_cli_verify(tmp_path, capsys):
    path = _write(tmp_path, SMALL)
    assert main(["verify", path, "--resolution", "5"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_cli_overrides(tmp_path):
    path = _write(tmp_path, SMALL)
    assert main(["solve", path, "--seed", "9", "--tol", "1e-6",
                 "--max-iters", "30000"]) == 0
