from pathlib import Path

import numpy as np
import pytest

import cptalloc.cli as cli
from cptalloc import (
    ConfigError,
    DiscreteEmpirical,
    NumericalError,
    RunConfig,
    load_config,
    parse_config,
    serialize_config,
    terminal_coefficients,
    terminal_stats,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def write_atoms(tmp_path, name="atoms.csv"):
    f = tmp_path / name
    f.write_text("value,probability\n1.0,0.6\n-0.2,0.4\n")
    return f


class TestParseConfig:
    def test_empty_text_gives_baseline(self):
        cfg = parse_config("")
        assert cfg == RunConfig()
        assert (cfg.alpha, cfg.lam, cfg.gamma, cfg.delta) == (0.88, 2.20, 0.61, 0.69)
        assert (cfg.lo_frac, cfg.hi_frac) == (-5.0, 5.0)
        assert (cfg.mu, cfg.sigma) == (0.045, 1.69)
        assert (cfg.horizon, cfg.w0) == (10, 0.8)
        assert cfg.rate_model == "sqrt_t"

    def test_shipped_default_config_is_baseline(self):
        cfg = load_config(CONFIG_DIR / "default.cfg")
        assert cfg == RunConfig()

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# hello\n\nalpha = 0.5  # inline\n")
        assert cfg.alpha == 0.5

    def test_rejects_alpha_out_of_bounds(self):
        with pytest.raises(ConfigError, match=r"0 < alpha < 1"):
            parse_config("alpha = 1.5")

    def test_rejects_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key: alpa"):
            parse_config("alpa = 0.5")

    def test_rejects_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("alpha = 0.5\nalpha = 0.6")

    def test_rejects_bad_syntax(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config("alpha 0.5")

    def test_rejects_bad_number(self):
        with pytest.raises(ConfigError, match="invalid value for alpha"):
            parse_config("alpha = zero")

    def test_rejects_non_finite_values(self):
        with pytest.raises(ConfigError, match="mu must be finite"):
            parse_config("mu = inf")
        with pytest.raises(ConfigError, match="hi_frac must be finite"):
            parse_config("hi_frac = inf")

    def test_rejects_illposed_combination(self):
        with pytest.raises(ConfigError, match=r"2\*min\(gamma, delta\)"):
            parse_config("alpha = 0.9\ngamma = 0.43\ndelta = 0.95")

    def test_fixed_rate_model_requires_rate(self):
        with pytest.raises(ConfigError, match="missing required key: rate"):
            parse_config("rate_model = fixed")
        cfg = parse_config("rate_model = fixed\nrate = 0.03")
        assert cfg.rate == 0.03

    def test_roundtrip_is_idempotent(self):
        for text in ("lambda = 2.2", "", "alpha = 0.5\nsigma = 0.25\nrate_model = fixed\nrate = 0.01"):
            once = serialize_config(parse_config(text))
            twice = serialize_config(parse_config(once))
            assert once == twice

    def test_load_resolves_relative_atom_file(self, tmp_path):
        write_atoms(tmp_path)
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("atom_file = atoms.csv\n")
        cfg = load_config(cfg_file)
        assert Path(cfg.atom_file).is_absolute()
        y = cfg.y_distribution()
        assert isinstance(y, DiscreteEmpirical)
        np.testing.assert_array_equal(y.values, [-0.2, 1.0])

    def test_atom_file_takes_precedence_over_mu_sigma(self, tmp_path):
        f = write_atoms(tmp_path)
        cfg = parse_config(f"atom_file = {f}\nmu = 0.1\nsigma = 0.2\n")
        assert isinstance(cfg.y_distribution(), DiscreteEmpirical)

    def test_missing_atom_file_is_config_error(self):
        cfg = parse_config("atom_file = /nonexistent/atoms.csv")
        with pytest.raises(ConfigError, match="atom_file"):
            cfg.y_distribution()

    def test_mu_sigma_schedules(self):
        cfg = parse_config("horizon = 3\nmu = 0.01,0.02,0.03\nsigma = 0.5")
        assert cfg.mu == (0.01, 0.02, 0.03)
        sched = cfg.y_schedule()
        assert [d.mu for d in sched] == [0.01, 0.02, 0.03]
        assert all(d.sigma == 0.5 for d in sched)
        once = serialize_config(cfg)
        assert "mu = 0.01,0.02,0.03" in once
        assert serialize_config(parse_config(once)) == once

    def test_schedule_length_must_match_horizon(self):
        with pytest.raises(ConfigError, match="one value per period"):
            parse_config("horizon = 3\nsigma = 0.5,0.6")

    def test_stationary_schedule_solves_identically(self, tmp_path):
        scalar = parse_config(f"horizon = 2\nsigma = 0.3\nout_dir = {tmp_path}/a")
        sched = parse_config(
            f"horizon = 2\nmu = 0.045,0.045\nsigma = 0.3,0.3\nout_dir = {tmp_path}/b"
        )
        a = cli.run_solve(scalar).read_text().splitlines()[1:]
        b = cli.run_solve(sched).read_text().splitlines()[1:]
        assert a == b  # provenance hash differs, policy rows identical


class TestRunSolve:
    def test_single_period_matches_terminal_row(self, tmp_path):
        f = write_atoms(tmp_path)
        cfg = parse_config(
            f"atom_file = {f}\nhorizon = 1\nrate_model = fixed\nrate = 0.03\nout_dir = {tmp_path}/out"
        )
        target = cli.run_solve(cfg)
        lines = target.read_text().strip().splitlines()
        assert lines[0].startswith("# config_sha256 = ")
        assert lines[1] == "t,A_t,B_t,kStar,kHatStar"
        assert len(lines) == 3
        stats = terminal_stats(cfg.preferences(), cfg.y_distribution(), cfg.cdf_tol)
        want = terminal_coefficients(cfg.preferences(), cfg.constraints(), stats, t=0)
        cells = lines[2].split(",")
        assert float(cells[1]) == want.a_coef
        assert float(cells[3]) == want.k_star

    def test_baseline_policy_stays_in_bounds(self, tmp_path):
        cfg = parse_config(f"out_dir = {tmp_path}/out")
        target = cli.run_solve(cfg)
        lines = target.read_text().strip().splitlines()
        assert len(lines) == 2 + 10
        for line in lines[2:]:
            cells = line.split(",")
            assert -5.0 <= float(cells[3]) <= 5.0
            assert -5.0 <= float(cells[4]) <= 5.0

    def test_repeated_runs_byte_identical(self, tmp_path):
        f = write_atoms(tmp_path)
        cfg = parse_config(f"atom_file = {f}\nhorizon = 3\nout_dir = {tmp_path}/out")
        first = cli.run_solve(cfg).read_bytes()
        second = cli.run_solve(cfg).read_bytes()
        assert first == second


class TestRunSweep:
    def test_single_point_matches_solve(self, tmp_path):
        f = write_atoms(tmp_path)
        base = f"atom_file = {f}\nhorizon = 2\nout_dir = {tmp_path}/out"
        cfg = parse_config(base)
        sweep_path = cli.run_sweep(cfg, "alpha", ["0.88"])
        solve_path = cli.run_solve(cfg)
        sweep_rows = [ln.split(",") for ln in sweep_path.read_text().strip().splitlines()[1:]]
        solve_rows = [ln.split(",") for ln in solve_path.read_text().strip().splitlines()[2:]]
        assert len(sweep_rows) == len(solve_rows) == 2
        for srow, prow in zip(sweep_rows, solve_rows):
            assert srow[0] == "0.88"
            assert srow[1] == prow[0]  # t
            assert srow[2] == prow[3]  # kStar
            assert srow[3] == prow[4]  # kHatStar
            assert srow[4] == prow[1]  # A_t
            assert srow[5] == prow[2]  # B_t

    def test_invalid_grid_point_aborts_before_writing(self, tmp_path):
        f = write_atoms(tmp_path)
        cfg = parse_config(f"atom_file = {f}\nhorizon = 2\nout_dir = {tmp_path}/out")
        with pytest.raises(ConfigError):
            cli.run_sweep(cfg, "alpha", ["0.5", "1.7"])
        assert not (tmp_path / "out" / "sweep_alpha.csv").exists()

    def test_rejects_unknown_param(self, tmp_path):
        cfg = parse_config(f"out_dir = {tmp_path}/out")
        with pytest.raises(ConfigError, match="sweep param"):
            cli.run_sweep(cfg, "beta", ["0.5"])

    def test_rate_mode_grid(self, tmp_path):
        f = write_atoms(tmp_path)
        cfg = parse_config(f"atom_file = {f}\nhorizon = 2\nout_dir = {tmp_path}/out")
        path = cli.run_sweep(cfg, "rate-mode", ["fixed", "sqrt_t"])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "param_value,t,kStar,kHatStar,A_t,B_t"
        assert len(lines) == 1 + 2 * 2
        assert {ln.split(",")[0] for ln in lines[1:]} == {"fixed", "sqrt_t"}


class TestRunValue:
    def test_amounts(self, tmp_path):
        f = write_atoms(tmp_path)
        cfg = parse_config(f"atom_file = {f}")
        assert cli.run_value(cfg, 0.0).value == 0.0
        v1 = cli.run_value(cfg, 1.0)
        v2 = cli.run_value(cfg, 2.0)
        assert v2.value / v1.value == pytest.approx(2.0**0.88, rel=1e-12)

    def test_fair_coin_report(self, tmp_path):
        f = tmp_path / "coin.csv"
        f.write_text("value,probability\n-1.0,0.5\n1.0,0.5\n")
        cfg = parse_config(f"atom_file = {f}")
        assert cli.run_value(cfg, 1.0).value == pytest.approx(-0.578, abs=1e-3)


class TestRunDemo:
    def test_writes_report(self, tmp_path):
        cfg = load_config(CONFIG_DIR / "demo.cfg")
        target = cli.run_demo(cfg, 0.0, 0.5, 9, out_dir=str(tmp_path / "out"))
        text = target.read_text()
        assert "cross_rate_gap" in text
        assert "low.precommit_z1" in text

    def test_requires_discrete_return(self, tmp_path):
        cfg = parse_config(f"out_dir = {tmp_path}/out")
        with pytest.raises(ConfigError, match="atom_file"):
            cli.run_demo(cfg, 0.0, 0.5, 9)

    def test_rejects_tiny_grid(self, tmp_path):
        cfg = load_config(CONFIG_DIR / "demo.cfg")
        with pytest.raises(ConfigError, match="grid"):
            cli.run_demo(cfg, 0.0, 0.5, 2, out_dir=str(tmp_path / "out"))


class TestMainExitCodes:
    def test_solve_success(self, tmp_path, capsys):
        f = write_atoms(tmp_path)
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(f"atom_file = {f.name}\nhorizon = 2\n")
        code = cli.main(["solve", "--config", str(cfg_file), "--out", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / "policy.csv").exists()

    def test_config_error_is_exit_1(self, tmp_path, capsys):
        cfg_file = tmp_path / "bad.cfg"
        cfg_file.write_text("alpha = 1.5\n")
        assert cli.main(["solve", "--config", str(cfg_file)]) == 1
        assert "config error" in capsys.readouterr().err

    def test_unknown_flag_is_exit_1(self, capsys):
        assert cli.main(["solve", "--bogus"]) == 1

    def test_missing_config_file_is_exit_1(self, capsys):
        assert cli.main(["solve", "--config", "/nonexistent.cfg"]) == 1

    def test_numerical_failure_is_exit_2(self, tmp_path, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise NumericalError("forced")

        monkeypatch.setattr(cli, "backward_induction", boom)
        f = write_atoms(tmp_path)
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(f"atom_file = {f.name}\nhorizon = 2\n")
        code = cli.main(["solve", "--config", str(cfg_file), "--out", str(tmp_path / "out")])
        assert code == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_demo_grid_too_small_is_exit_1(self, tmp_path, capsys):
        code = cli.main(
            ["demo", "--config", str(CONFIG_DIR / "demo.cfg"), "--demo-grid", "2",
             "--out", str(tmp_path / "out")]
        )
        assert code == 1

    def test_value_prints_report(self, tmp_path, capsys):
        f = write_atoms(tmp_path)
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(f"atom_file = {f.name}\n")
        assert cli.main(["value", "--config", str(cfg_file), "--amount", "1.0"]) == 0
        out = capsys.readouterr().out
        assert "value = " in out and "gain_part = " in out and "loss_part = " in out

    def test_simulate_writes_ensemble(self, tmp_path):
        f = write_atoms(tmp_path)
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(
            f"atom_file = {f.name}\nhorizon = 3\nn_paths = 8\ngrid_points = 101\n"
        )
        code = cli.main(
            ["simulate", "--config", str(cfg_file), "--out", str(tmp_path / "out"), "--seed", "5"]
        )
        assert code == 0
        for name in ("policy.csv", "paths.csv", "summary.csv"):
            assert (tmp_path / "out" / name).exists()
        paths_lines = (tmp_path / "out" / "paths.csv").read_text().strip().splitlines()
        assert len(paths_lines) == 1 + 8 * 4


class TestWorkerCount:
    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("CPT_ALLOC_THREADS", "1")
        assert cli.worker_count() == 1

    def test_invalid_env_is_config_error(self, monkeypatch):
        monkeypatch.setenv("CPT_ALLOC_THREADS", "many")
        with pytest.raises(ConfigError):
            cli.worker_count()
