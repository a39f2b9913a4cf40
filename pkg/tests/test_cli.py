import json
import shutil
import subprocess
import sys

import pytest

from growthopt import cli, harness
from growthopt import optimizers as P


def write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def ls_config(tmp_path):
    return write(tmp_path / "q.json", {
        "name": "q",
        "objective": {"builder": "interp_least_squares", "seed": 3, "n": 20, "d": 5},
        "seeds": [0],
        "N": 40,
        "constants": {"rho": "sup"},
        "grid": {"kinds": ["NSGD"], "regime": "cvx", "eta_mult": [1.0], "B": ["floor"],
                 "lam": [0.01]},
    })


def header(path):
    return P.RunTrace.from_csv(str(path)).metadata


class TestRun:
    def test_twice_identical(self, ls_config, tmp_path, capsys):
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert cli.main(["run", "--config", ls_config, "--seed", "1", "--out", str(out1)]) == 0
        assert cli.main(["run", "--config", ls_config, "--seed", "1", "--out", str(out2)]) == 0
        (a,) = out1.glob("*.csv")
        (b,) = out2.glob("*.csv")
        assert a.read_bytes() == b.read_bytes()
        assert "min_grad_norm" in capsys.readouterr().out

    def test_missing_config(self, tmp_path, capsys):
        assert cli.main(["run", "--config", str(tmp_path / "none.toml")]) == 2
        assert cli.main(["run"]) == 2
        assert "error" in capsys.readouterr().err

    def test_override_halves_eta(self, ls_config, tmp_path):
        cli.main(["run", "--config", ls_config, "--out", str(tmp_path / "a")])
        cli.main(["run", "--config", ls_config, "--out", str(tmp_path / "b"),
                  "--override", "eta_mult=0.5"])
        (a,) = (tmp_path / "a").glob("*.csv")
        (b,) = (tmp_path / "b").glob("*.csv")
        assert header(b)["config.eta"] == pytest.approx(0.5 * header(a)["config.eta"], rel=1e-15)

    def test_multi_cell_rejected(self, ls_config, tmp_path):
        assert cli.main(["run", "--config", ls_config, "--out", str(tmp_path),
                         "--override", "eta_mult=[0.5, 1.0]"]) == 2

    def test_divergence_exit_zero(self, ls_config, tmp_path, capsys):
        code = cli.main(["run", "--config", ls_config, "--out", str(tmp_path),
                         "--override", "kinds=[\"SGD\"]", "--override", "eta_mult=500",
                         "--override", "N=500"])
        assert code == 0
        assert "diverged: True" in capsys.readouterr().out

    def test_exact_digits(self, ls_config, tmp_path, capsys):
        cli.main(["run", "--config", ls_config, "--out", str(tmp_path), "--exact"])
        line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("final_gap"))
        value = line.split(": ")[1]
        trace = P.RunTrace.from_csv(str(next(tmp_path.glob("*.csv"))))
        assert float(value) == trace.final_gap


class TestSweepReport:
    def test_sweep_then_report(self, ls_config, tmp_path, capsys):
        out = str(tmp_path / "s")
        assert cli.main(["sweep", "--config", ls_config, "--out", out,
                         "--checks", "monotone_distance,step_length"]) == 0
        capsys.readouterr()
        assert cli.main(["report", "--out", out]) == 0
        text = capsys.readouterr().out
        assert "== q" in text and "monotone_distance" in text

    def test_report_empty_dir(self, tmp_path):
        assert cli.main(["report", "--out", str(tmp_path)]) == 2

    def test_unknown_check(self, ls_config):
        assert cli.main(["sweep", "--config", ls_config, "--checks", "bogus"]) == 2


class TestVerify:
    def test_empty_checks(self, ls_config, capsys):
        assert cli.main(["verify", "--config", ls_config, "--checks", ""]) == 0
        assert "0 checks" in capsys.readouterr().out

    def test_passing_config(self, ls_config, capsys):
        assert cli.main(["verify", "--config", ls_config, "--checks", "monotone_distance"]) == 0
        assert "1 checks: 1 pass" in capsys.readouterr().out

    def test_inadmissible_fails_with_witness(self, ls_config, capsys):
        code = cli.main(["verify", "--config", ls_config, "--checks", "monotone_distance",
                         "--override", "eta_mult=100", "--override", "N=300",
                         "--override", "seeds=[0,1,2,3,4]"])
        out = capsys.readouterr().out
        assert code == 1 and "witness" in out and "iteration" in out

    @pytest.mark.slow
    def test_bundled_suite(self, capsys):
        assert cli.main(["verify"]) == 0
        assert " 0 fail," in capsys.readouterr().out


class TestEstimateRho:
    def test_identical_components(self, tmp_path, capsys):
        cfg = write(tmp_path / "id.json", {"objective": {
            "builder": "interp_least_squares", "A": [[1.0, 2.0]] * 3, "x_star": [0.0, 0.0]}})
        assert cli.main(["estimate-rho", "--config", cfg, "--point", "[1, 1]"]) == 0
        out = capsys.readouterr().out
        assert "rho_hat: 1\n" in out
        floors = [l for l in out.splitlines() if l.startswith("batch_floor")]
        assert len(floors) == 6 and all(l.endswith(": 1") for l in floors)

    def test_pareto_heavy_floor(self, tmp_path, capsys):
        cfg = write(tmp_path / "p.json", {"objective": {"builder": "pareto_quadratic",
                                                        "alpha": 1.5, "d": 2}})
        assert cli.main(["estimate-rho", "--config", cfg, "--p", "1.2", "--samples", "20000"]) == 0
        out = capsys.readouterr().out
        # 2^((3p+1)/(p-1)) * (rho-1)^(1/(p-1)) = 2^23 * 5^5
        assert f"batch_floor[heavy, closed form]: {2**23 * 5**5}" in out
        assert "rho_p_closed_form: 6" in out

    def test_degenerate_point(self, ls_config, capsys):
        pt = json.dumps(harness.resolve_problem(harness.load_config(ls_config)).obj.known_optimum.tolist())
        assert cli.main(["estimate-rho", "--config", ls_config, "--point", pt]) == 1
        assert "degenerate" in capsys.readouterr().err

    def test_pareto_needs_p(self, tmp_path):
        cfg = write(tmp_path / "p.json", {"objective": {"builder": "pareto_quadratic",
                                                        "alpha": 1.5, "d": 2}})
        assert cli.main(["estimate-rho", "--config", cfg]) == 2

    def test_bad_point(self, ls_config):
        assert cli.main(["estimate-rho", "--config", ls_config, "--point", "[1, 2]"]) == 2


class TestParser:
    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["run", "--bogus"])
        assert exc.value.code == 2

    def test_help_lists_flags(self):
        text = cli.build_parser()._subparsers._group_actions[0].choices["sweep"].format_help()
        for flag in ("--config", "--seed", "--out", "--override", "--checks", "--exact"):
            assert flag in text

    def test_no_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 2

    @pytest.mark.skipif(shutil.which("growthopt") is None, reason="console script not installed")
    def test_console_script(self):
        proc = subprocess.run(["growthopt", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0 and "estimate-rho" in proc.stdout

    def test_module_entry(self):
        proc = subprocess.run([sys.executable, "-m", "growthopt.cli", "verify", "--checks", ""],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "0 checks" in proc.stdout
