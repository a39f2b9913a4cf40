import json

import numpy as np
import pytest

from growthopt import harness as H
from growthopt import objectives as O
from growthopt import optimizers as P
from growthopt import verify as V
from growthopt.errors import ConfigError


def base_config(**over):
    cfg = {
        "name": "t",
        "objective": {"builder": "interp_least_squares", "seed": 3, "n": 20, "d": 5},
        "seeds": [1, 2],
        "N": 30,
        "constants": {"rho": "sup"},
        "grid": {"kinds": ["ClipSGD", "NSGD"], "regime": "cvx", "eta_mult": [0.5, 1.0, 2.0],
                 "B": ["floor", 4], "c_mult": [0.5], "lam": [0.01]},
    }
    cfg.update(over)
    return cfg


class TestConfig:
    def test_load_toml_and_json(self, tmp_path):
        (tmp_path / "a.json").write_text(json.dumps(base_config()))
        (tmp_path / "b.toml").write_text(
            'seeds = [0]\nN = 5\n[objective]\nbuilder = "pareto_quadratic"\nalpha = 1.5\nd = 2\n'
            '[grid]\nkinds = ["SGD"]\n')
        assert H.load_config(tmp_path / "a.json")["name"] == "t"
        assert H.load_config(tmp_path / "b.toml")["name"] == "b"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            H.load_config(tmp_path / "nope.toml")

    def test_parse_error(self, tmp_path):
        (tmp_path / "bad.json").write_text("{")
        with pytest.raises(ConfigError):
            H.load_config(tmp_path / "bad.json")

    @pytest.mark.parametrize("mutate", [
        lambda c: c.update(bogus=1),
        lambda c: c.update(seeds=[1, 1]),
        lambda c: c.update(seeds=[]),
        lambda c: c["grid"].update(kinds=[]),
        lambda c: c["grid"].update(eta_mult=[]),
        lambda c: c["grid"].update(kinds=["Adam"]),
        lambda c: c["grid"].update(regime="weird"),
        lambda c: c.update(checks=["nope"]),
        lambda c: c.update(theorems=["thm9"]),
        lambda c: c.update(N=-1),
    ])
    def test_invalid(self, mutate):
        cfg = base_config()
        mutate(cfg)
        with pytest.raises(ConfigError):
            H.validate_config(cfg)

    def test_overrides(self):
        cfg = H.apply_overrides(base_config(), ["eta_mult=0.25", "N=7", "constants.rho=3.0",
                                                "grid.c_mult=[1, 2]"])
        assert cfg["grid"]["eta_mult"] == [0.25] and cfg["N"] == 7
        assert cfg["constants"]["rho"] == 3.0 and cfg["grid"]["c_mult"] == [1, 2]

    @pytest.mark.parametrize("item", ["nokey", "mystery=1", "weird.x=1"])
    def test_bad_override(self, item):
        with pytest.raises(ConfigError):
            H.apply_overrides(base_config(), [item])

    def test_bundled_configs_load(self):
        paths = H.bundled_configs()
        assert len(paths) >= 5
        for p in paths:
            H.load_config(p)


class TestGrid:
    def test_cartesian_size(self):
        # 2 kinds x 3 eta x 2 B
        assert len(H.expand_grid(base_config())) == 12

    def test_unit_multiplier_matches_rule(self):
        cfg = base_config()
        cfg["grid"].update(kinds=["NSGD"], eta_mult=[1.0], B=["floor"])
        (oc,) = H.expand_grid(cfg)
        obj = O.build_interp_least_squares(3, 20, 5)
        prof = O.smoothness_constants(obj)
        rho = O.growth_constant(obj)
        expect = P.theorem_stepsize("nsgd_cvx", {"cL0": prof.cL0, "cL1": prof.cL1, "rho": rho,
                                                 "lam": 0.01})
        assert oc.eta == expect
        assert oc.batch_size == P.batch_floor("nsgd_cvx", rho)

    def test_no_grid(self):
        cfg = base_config()
        del cfg["grid"]
        with pytest.raises(ConfigError):
            H.expand_grid(cfg)

    def test_clip_needs_radius(self):
        cfg = base_config()
        cfg["grid"].pop("c_mult")
        with pytest.raises(ConfigError):
            H.expand_grid(cfg)

    def test_unresolvable_constants(self):
        # logistic has no optimum, so the convex rules' R0-based lambda fails
        cfg = base_config(objective={"builder": "separable_logistic", "seed": 1, "n": 10, "d": 3,
                                     "margin": 0.5}, constants={})
        cfg["grid"].update(kinds=["NSGD"], regime="cvx", lam=[], eps_rel=[0.1])
        cfg["grid"].pop("lam")
        with pytest.raises(ConfigError):
            H.expand_grid(cfg)

    def test_complexity_iterations(self):
        cfg = base_config(N="complexity")
        cfg["grid"].update(kinds=["NSGD"], eta_mult=[1.0], B=["floor"], eps_rel=[0.5])
        cfg["grid"].pop("lam")
        (oc,) = H.expand_grid(cfg)
        p = H.resolve_problem(H.validate_config(cfg))
        c = p.constants
        eps = 0.5 * c["F0"]
        assert oc.max_iters == P.nsgd_cvx_iterations(c["cL0"], c["cL1"], c["rho"], c["R0"], c["F0"], eps)
        assert oc.lam == pytest.approx(eps / (12 * c["R0"]))

    def test_rho_sources(self):
        cfg = base_config(constants={})
        c = H.resolve_problem(H.validate_config(cfg)).constants
        assert c["rho_source"] == "x0" and c["rho"] >= 1.0
        cfg = base_config(constants={"rho": 7.5})
        assert H.resolve_problem(H.validate_config(cfg)).constants["rho"] == 7.5
        cfg = base_config(objective={"builder": "pareto_quadratic", "alpha": 1.5, "d": 2},
                          constants={"p": 1.2})
        assert H.resolve_problem(H.validate_config(cfg)).constants["rho"] == pytest.approx(6.0)

    def test_offset_start(self):
        cfg = base_config(x0="offset", x0_offset=2.0)
        p = H.resolve_problem(H.validate_config(cfg))
        assert p.constants["R0"] == pytest.approx(2.0)


class TestExecute:
    def test_zero_iterations(self):
        cfg = base_config(N=0)
        cfg["grid"].update(kinds=["SGD"], eta_mult=[1.0], B=[1])
        res = H.execute(cfg)
        (cell,) = res.cells
        t = cell.traces[0]
        assert t.iterations == 0
        assert cell.summary["final_gap"]["mean"] == pytest.approx(res.constants["F0"])

    def test_rerun_identical(self, tmp_path):
        a = H.write_outputs(H.execute(base_config()), tmp_path / "a")
        b = H.write_outputs(H.execute(base_config()), tmp_path / "b")
        assert [p.name for p in a] == [p.name for p in b]
        for pa, pb in zip(a, b):
            assert pa.read_bytes() == pb.read_bytes()

    def test_cell_order_invariance(self):
        cfg = base_config()
        res = H.execute(cfg)
        cfg["grid"]["kinds"] = ["NSGD", "ClipSGD"]
        cfg["grid"]["eta_mult"] = [2.0, 1.0, 0.5]
        rev = {c.label: c for c in H.execute(cfg).cells}
        for c in res.cells:
            for t1, t2 in zip(c.traces, rev[c.label].traces):
                assert t1.to_csv() == t2.to_csv()

    def test_divergence_recorded_not_raised(self):
        cfg = base_config(N=200)
        cfg["grid"].update(kinds=["SGD"], eta_mult=[200.0], B=[1])
        res = H.execute(cfg)
        assert res.cells[0].summary["diverged"] == 2

    def test_checks_attached(self):
        cfg = base_config(checks=["monotone_distance", "step_length", "rho_floor", "variance_batch"])
        cfg["grid"].update(eta_mult=[1.0], B=["floor"])
        res = H.execute(cfg)
        ids = [r.lemma_id for r in res.all_reports()]
        assert any(i.endswith("monotone_distance") for i in ids)
        assert "variance_batch" in ids
        assert not res.failed

    def test_negative_monotone_in_sweep(self):
        cfg = base_config(N=300, seeds=list(range(5)), checks=["monotone_distance"])
        cfg["grid"].update(kinds=["NSGD"], eta_mult=[100.0], B=["floor"])
        res = H.execute(cfg)
        (rep,) = res.all_reports()
        assert rep.status == V.FAIL and "seed" in rep.witness

    def test_gd_cell_runs_once(self):
        cfg = {"name": "g", "objective": {"builder": "exp_inner_product", "a": [1.0, 0.5]},
               "seeds": [0, 1, 2], "N": 50, "x0": [3.0, 1.0], "checks": ["descent_gd"],
               "grid": {"kinds": ["GDWarmup"]}}
        res = H.execute(cfg)
        (cell,) = res.cells
        assert len(cell.traces) == 3 and cell.traces[0] is cell.traces[2]
        assert not res.failed

    def test_mds_config_level(self):
        cfg = {"name": "m", "checks": ["mds_bound"],
               "mds": {"p": [2.0], "n": [4], "models": ["rademacher"], "num_samples": 5000}}
        res = H.execute(cfg)
        assert len(res.reports) == 1 and res.reports[0].passed


class TestOutputs:
    def test_files_and_schema(self, tmp_path):
        res = H.execute(base_config())
        paths = H.write_outputs(res, tmp_path)
        csvs = [p for p in paths if p.suffix == ".csv"]
        assert len(csvs) == 12 * 2
        text = csvs[0].read_text()
        assert "k,grad_norm,gap,step_size,dist_to_opt,step_len\n" in text
        back = P.RunTrace.from_csv(csvs[0])
        np.testing.assert_array_equal(back.gap, res.cells[0].traces[0].gap)
        summary = json.loads((tmp_path / "t__summary.json").read_text())
        assert len(summary["cells"]) == 12

    def test_empty_result_summary_only(self, tmp_path):
        res = H.SweepResult("empty", [], [], {})
        paths = H.write_outputs(res, tmp_path)
        assert [p.name for p in paths] == ["empty__summary.json"]

    def test_overwrite_idempotent(self, tmp_path):
        res = H.execute(base_config(N=5))
        a = [p.read_bytes() for p in H.write_outputs(res, tmp_path)]
        b = [p.read_bytes() for p in H.write_outputs(res, tmp_path)]
        assert a == b

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(ConfigError):
            H.write_outputs(H.SweepResult("e", [], [], {}), blocker / "sub")

    def test_env_output_dir(self, monkeypatch, tmp_path):
        monkeypatch.setenv(H.OUT_ENV, str(tmp_path))
        assert H.default_output_dir({"output_dir": "elsewhere"}) == tmp_path
        monkeypatch.delenv(H.OUT_ENV)
        assert str(H.default_output_dir({"output_dir": "elsewhere"})) == "elsewhere"


class TestStability:
    def test_stable_step_sizes(self):
        cfg = base_config(N=200, seeds=[0, 1])
        cfg["grid"].update(kinds=["SGD", "NSGD"], eta_mult=[1.0, 64.0], B=[1], lam=[0.05])
        best = H.stable_step_sizes(H.execute(cfg))
        assert set(best) == {"SGD", "NSGD"}
        assert best["NSGD"] is not None
