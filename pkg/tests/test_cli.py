import os

import numpy as np
import pytest

from dwdegroot import __version__, cli, experiments
from dwdegroot.cli import ConfigError, main, parse_config, run
from dwdegroot.experiments import SpeedupResult, SweepRow

TWO_GROUP = ["--n1", "200", "--n", "1000", "--m", "2", "--p", "0.4", "--q", "0.2"]
SMALL = ["--n1", "20", "--n2", "40", "--m", "3", "--p", "0.6", "--q", "0.2"]


def files(path):
    return sorted(os.listdir(path))


def read(path, name):
    with open(os.path.join(path, name), "rb") as fh:
        return fh.read()


class TestParse:
    def test_two_group_example(self):
        cfg = parse_config(["sweep", *TWO_GROUP, "--alpha", "-10:10:0.25", "--trials", "0", "--seed", "7"], environ={})
        assert cfg.subcommand == "sweep"
        assert (cfg.n1, cfg.n2, cfg.m, cfg.p, cfg.q) == (200, 800, 2, 0.4, 0.2)
        assert cfg.alpha == (-10.0, 10.0, 0.25) and cfg.trials == 0 and cfg.seed == 7
        assert cfg.out == "."

    def test_missing_q(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(["sweep", *TWO_GROUP[:-2]], environ={})
        assert exc.value.key == "q"

    def test_p_out_of_range(self):
        with pytest.raises(ConfigError, match="p: must lie in"):
            parse_config(["audit", *TWO_GROUP[:6], "--p", "1.7", "--q", "0.2"], environ={})

    def test_main_reports_key(self, capsys):
        assert main(["sweep", *TWO_GROUP[:-2]]) == cli.EXIT_CONFIG
        assert "q: missing" in capsys.readouterr().err

    def test_bad_total_size(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(["audit", "--n1", "200", "--n", "1001", "--m", "3", "--p", "0.4", "--q", "0.2"], environ={})
        assert exc.value.key == "n"

    @pytest.mark.parametrize(
        "extra, key",
        [
            (["--trials", "-1"], "trials"),
            (["--alpha", "1:0:0.5"], "alpha"),
            (["--alpha", "0:1:x"], "alpha"),
            (["--norm", "l1"], "norm"),
            (["--seed", "1.5"], "seed"),
        ],
    )
    def test_range_errors_name_key(self, extra, key):
        with pytest.raises(ConfigError) as exc:
            parse_config(["sweep", *TWO_GROUP, *extra], environ={})
        assert exc.value.key == key

    def test_speedup_order(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(["speedup", *TWO_GROUP, "--alpha0", "2", "--alpha1", "0"], environ={})
        assert exc.value.key == "alpha1"

    def test_config_file_and_override(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("# two groups\nn1 = 200\nn = 1000\nm=2\np=0.4\nq=0.2\nalpha=-1:1:0.5\ntrials=3\n")
        cfg = parse_config(["sweep", "--config", str(conf), "--trials", "0"], environ={})
        assert cfg.trials == 0 and cfg.alpha == (-1.0, 1.0, 0.5) and cfg.n2 == 800

    def test_config_unknown_key(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("n1=200\ncolour=blue\n")
        with pytest.raises(ConfigError) as exc:
            parse_config(["sweep", "--config", str(conf)], environ={})
        assert exc.value.key == "colour"

    def test_config_key_from_other_subcommand(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("delta=0.1\n")
        with pytest.raises(ConfigError) as exc:
            parse_config(["sweep", "--config", str(conf)], environ={})
        assert exc.value.key == "delta"

    def test_config_for_other_subcommand(self, tmp_path):
        conf = tmp_path / "manifest.txt"
        conf.write_text("subcommand=audit\n")
        with pytest.raises(ConfigError, match="subcommand"):
            parse_config(["sweep", "--config", str(conf)], environ={})

    def test_env_overrides_out(self):
        cfg = parse_config(["audit", *TWO_GROUP, "--out", "a"], environ={"DEGROOT_OUT": "b"})
        assert cfg.out == "b"
        assert parse_config(["audit", *TWO_GROUP, "--out", "a"], environ={}).out == "a"

    def test_no_subcommand(self):
        with pytest.raises(ConfigError):
            parse_config([], environ={})


class TestRun:
    def test_two_group_sweep_and_manifest_rerun(self, tmp_path, monkeypatch):
        monkeypatch.delenv("DEGROOT_OUT", raising=False)
        first, second = tmp_path / "a", tmp_path / "b"
        argv = ["sweep", *TWO_GROUP, "--alpha", "-10:10:0.25", "--trials", "0", "--seed", "7"]
        assert main([*argv, "--out", str(first)]) == 0
        assert files(first) == ["manifest.txt", "sweep.csv", "sweep.svg"]
        manifest = read(first, "manifest.txt").decode()
        assert f"version={__version__}" in manifest and "seed=7" in manifest
        assert main(["sweep", "--config", str(first / "manifest.txt"), "--out", str(second)]) == 0
        for name in files(first):
            assert read(first, name) == read(second, name), name
        header = read(first, "sweep.csv").decode().splitlines()[0]
        assert header == "alpha,case_id,branch,lambda2_closed,lambda2_numeric,abs_gap,lambda2_random_mean,lambda2_random_std,random_gap_median,n_failed,error"

    def test_audit_prints_tau(self, tmp_path, capsys):
        assert main(["audit", *TWO_GROUP, "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "tau_n = 0.24\n" in out
        assert "density: FAIL" in out and "comparable_densities: pass" in out
        assert "case = 1" in out and "[-3.41902, inf)" in out

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["audit", *TWO_GROUP, "--out", str(blocker / "sub")]) == cli.EXIT_OUTPUT
        assert "out:" in capsys.readouterr().err

    def test_speedup_outside_regime(self, tmp_path, capsys):
        argv = ["speedup", *TWO_GROUP, "--alpha0", "-6", "--alpha1", "0", "--trials", "2", "--out", str(tmp_path)]
        assert main(argv) == cli.EXIT_CONFIG
        assert "decreasing set" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "argv, expected",
        [
            (["sweep", "--alpha", "-1:1:1", "--trials", "2", "--t", "1,2"], ["manifest.txt", "sweep.csv", "sweep.svg"]),
            (["concentration", "--n-grid", "60,120", "--trials", "2"], ["concentration.csv", "concentration.svg", "manifest.txt"]),
            (["speedup", "--alpha0", "-4", "--alpha1", "-3", "--trials", "3"], ["manifest.txt", "speedup.csv"]),
            (["perturb", "--alpha", "-1:1:1", "--delta", "0,0.3", "--trials", "1"], ["manifest.txt", "perturb.csv", "perturb.svg", "perturb_checks.csv"]),
            (["probe", "--alpha", "0.5", "--t", "4", "--samples", "20"], ["manifest.txt", "probe.csv", "probe.svg", "probe_summary.csv"]),
            (["audit"], ["audit.txt", "manifest.txt"]),
        ],
    )
    def test_every_subcommand_reproduces(self, tmp_path, argv, expected):
        first, second = tmp_path / "a", tmp_path / "b"
        assert main([argv[0], *SMALL, *argv[1:], "--out", str(first)]) == 0
        assert files(first) == expected
        assert main([argv[0], "--config", str(first / "manifest.txt"), "--out", str(second)]) == 0
        for name in expected:
            assert read(first, name) == read(second, name), name

    def test_jobs_do_not_change_output(self, tmp_path):
        base = ["sweep", *SMALL, "--alpha", "-1:1:0.5", "--trials", "3", "--seed", "5"]
        assert main([*base, "--jobs", "1", "--out", str(tmp_path / "a")]) == 0
        assert main([*base, "--jobs", "3", "--out", str(tmp_path / "b")]) == 0
        assert read(tmp_path / "a", "sweep.csv") == read(tmp_path / "b", "sweep.csv")


class TestNoComputation:
    """The CLI must only move numbers produced by the library."""

    def test_sweep_writes_what_experiments_return(self, tmp_path, monkeypatch):
        calls = {}

        def fake_sweep(cfg, n_jobs=1):
            calls["alphas"] = list(cfg.alphas)
            calls["seed"] = cfg.seed
            return [SweepRow(alpha=a, case_id=9, branch="fake", lambda2_closed=0.125) for a in cfg.alphas]

        monkeypatch.setattr(experiments, "alpha_sweep", fake_sweep)
        assert main(["sweep", *TWO_GROUP, "--alpha", "0:1:0.5", "--trials", "0", "--seed", "3", "--no-svg", "--out", str(tmp_path)]) == 0
        assert calls == {"alphas": [0.0, 0.5, 1.0], "seed": 3}
        lines = read(tmp_path, "sweep.csv").decode().splitlines()
        assert lines[1:] == [f"{a},9,fake,0.125,,,,,,0," for a in ("0.0", "0.5", "1.0")]

    def test_failures_give_nonzero_exit(self, tmp_path, monkeypatch, capsys):
        rows = [SweepRow(alpha=0.0, error="ConstructionError: boom"), SweepRow(alpha=1.0, n_failed=4)]
        monkeypatch.setattr(experiments, "alpha_sweep", lambda cfg, n_jobs=1: rows)
        monkeypatch.setattr(experiments, "svg_line_plot", lambda *a, **k: "<svg/>\n")
        assert main(["sweep", *TWO_GROUP, "--alpha", "0:1:1", "--out", str(tmp_path)]) == cli.EXIT_FAILURES
        assert "1 of 2 rows failed, 4 failed trials" in capsys.readouterr().err
        assert read(tmp_path, "sweep.svg") == b"<svg/>\n"

    def test_speedup_passthrough(self, tmp_path, monkeypatch):
        res = SpeedupResult(0.5, 1, 2, 0, 0.1, 0.9, 0.0, 2.0, 0.25)
        monkeypatch.setattr(experiments, "speedup_detection", lambda *a, **k: res)
        assert main(["speedup", *TWO_GROUP, "--alpha0", "0", "--alpha1", "2", "--trials", "2", "--out", str(tmp_path)]) == 0
        assert read(tmp_path, "speedup.csv").decode().splitlines()[1] == "0.5,1,2,0,0.1,0.9,0.0,2.0,0.25"

    def test_run_takes_parsed_config(self, tmp_path, monkeypatch):
        seen = []
        monkeypatch.setitem(cli.RUNNERS, "audit", lambda cfg, out: seen.append((cfg.n2, out)) or {"rows": 1, "rows_with_errors": 0, "failed_trials": 0})
        cfg = parse_config(["audit", *TWO_GROUP, "--out", str(tmp_path)], environ={})
        assert run(cfg) == 0 and seen == [(800, str(tmp_path))]
        assert np.all([line.count("=") == 1 for line in read(tmp_path, "manifest.txt").decode().splitlines()])
