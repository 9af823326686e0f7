import json
import math
from pathlib import Path

import pytest

from elicit.cli import main

from conftest import DIAGNOSTIC_CONFIG_DIR, SWEEP_CONFIG_DIR


def write_config(tmp_path, name="exp", **overrides):
    cfg = {
        "model": {"name": "poisson", "fixed_params": []},
        "analytic": {"name": "poisson", "params": [3.0], "perturb": [0.0, 3.0]},
        "link": "variance",
        "sweep": {"index": 1, "grid": {"num_points": 9}},
        "optimizer": {"multistart": 2},
        "output": str(tmp_path / "out" / name),
    }
    cfg.update(overrides)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    return path, Path(cfg["output"])


class TestRun:
    def test_writes_outputs(self, tmp_path):
        cfg_path, out = write_config(tmp_path)
        assert main(["run", str(cfg_path)]) == 0
        assert (out / "curve.csv").exists()
        assert (out / "manifest.json").exists()
        assert (out / "report.json").exists()

    def test_rerun_byte_identical(self, tmp_path):
        cfg_path, out = write_config(tmp_path)
        assert main(["run", str(cfg_path)]) == 0
        first = (out / "curve.csv").read_bytes()
        assert main(["run", str(cfg_path)]) == 0
        assert (out / "curve.csv").read_bytes() == first

    def test_csv_format(self, tmp_path):
        cfg_path, out = write_config(tmp_path)
        main(["run", str(cfg_path)])
        lines = (out / "curve.csv").read_text().splitlines()
        assert lines[0] == (
            "c_value,theta_1,r_1,r_2,gamma,total_loss,sub_loss_1,sub_loss_2,converged"
        )
        assert len(lines) == 1 + 9 + 2
        first = lines[1].split(",")
        assert first[0] == "0.0" and first[-1] == "true"
        last = lines[-1].split(",")
        assert last[0] == "inf"
        # round-trip float formatting
        gamma = float(last[4])
        assert gamma == pytest.approx(3.0, abs=1e-6)
        for field in last[1:-1]:
            assert math.isfinite(float(field))

    def test_manifest_echoes_defaults_and_prng(self, tmp_path):
        cfg_path, out = write_config(tmp_path)
        main(["run", str(cfg_path)])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["optimizer"]["method"] == "nelder_mead"
        assert manifest["optimizer"]["tol_loss"] == 1e-12
        assert manifest["base_weights"] == "ones"
        assert manifest["sweep"]["fixed_weights"] == [1.0, 1.0]
        assert "Philox" in manifest["prng"]["algorithm"]

    def test_report_contents(self, tmp_path):
        cfg_path, out = write_config(tmp_path)
        main(["run", str(cfg_path)])
        report = json.loads((out / "report.json").read_text())
        assert report["monotonicity"]["direction"] == "decreasing"
        assert report["best_weight"]["kind"] == "zero"
        assert report["classification_2d"]["case"] == "b"
        check_names = {c["name"] for c in report["checks"]}
        assert {"one_sided_containment", "link_monotone_along_trajectory"} <= check_names

    def test_mismatched_link_and_model(self, tmp_path, capsys):
        cfg_path, _ = write_config(tmp_path, link="skewness")
        assert main(["run", str(cfg_path)]) == 1
        assert "link" in capsys.readouterr().err

    def test_unknown_key_named(self, tmp_path, capsys):
        cfg_path, _ = write_config(tmp_path, typo_key=1)
        assert main(["run", str(cfg_path)]) == 1
        assert "typo_key" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert main(["run", str(p)]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.json")]) == 1

    def test_failure_rate_exits_2(self, tmp_path):
        cfg_path, out = write_config(
            tmp_path, optimizer={"multistart": 0, "max_iters": 1}
        )
        assert main(["run", str(cfg_path)]) == 2
        assert (out / "curve.csv").exists()  # outputs still written


class TestClassify:
    def test_poisson_case_b(self, capsys):
        code = main(["classify", "--model", "poisson", "--link", "variance",
                     "--interval", "0.5,20"])
        assert code == 0
        assert "case b" in capsys.readouterr().out

    def test_binomial_mixed(self, capsys):
        code = main(["classify", "--model", "binomial_fixed_trials",
                     "--fixed-params", "10", "--link", "variance",
                     "--interval", "0.5,9.5"])
        assert code == 0
        out = capsys.readouterr().out
        assert "mixed" in out and "5" in out

    def test_expect_uniform_exit_3(self):
        code = main(["classify", "--model", "binomial_fixed_trials",
                     "--fixed-params", "10", "--link", "variance",
                     "--interval", "0.5,9.5", "--expect-uniform"])
        assert code == 3

    def test_gamma_fixed_shape(self, capsys):
        code = main(["classify", "--model", "gamma_fixed_shape", "--fixed-params", "2",
                     "--link", "variance", "--interval", "0.5,20"])
        assert code == 0
        assert "case b" in capsys.readouterr().out

    def test_bad_interval(self):
        assert main(["classify", "--model", "poisson", "--link", "variance",
                     "--interval", "oops"]) == 1

    def test_unknown_option(self):
        assert main(["classify", "--nonsense"]) == 1


class TestOracle:
    def test_poisson_dominance(self, tmp_path, capsys):
        cfg_path, _ = write_config(tmp_path)
        assert main(["oracle", str(cfg_path), "--width", "0.01"]) == 0
        out = capsys.readouterr().out
        assert "meshgrid" in out and "matches or beats" in out

    def test_width_larger_than_box(self, tmp_path):
        cfg_path, _ = write_config(tmp_path)
        assert main(["oracle", str(cfg_path), "--width", "50"]) == 1

    def test_sensitivity_config_logs_two_gammas(self, capsys):
        code = main(["oracle", str(DIAGNOSTIC_CONFIG_DIR / "sensitivity-lognormal.json"),
                     "--width", "0.1"])
        out = capsys.readouterr().out
        gammas = [float(line.split("gamma = ")[1]) for line in out.splitlines()
                  if "gamma = " in line]
        assert len(gammas) == 2
        # gradient descent with unit base weights: start-dependent results
        assert abs(gammas[0] - gammas[1]) / max(abs(g) for g in gammas) > 0.5
        assert code in (0, 2)


class TestVerify:
    def test_logmap_suite(self, capsys):
        assert main(["verify", "logmap"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["pass"] is True
        assert summary["suite"] == "logmap"

    def test_unknown_suite(self):
        assert main(["verify", "nonsense"]) == 1

    def test_identities_suite(self, capsys):
        assert main(["verify", "identities"]) == 0
        summary = json.loads(capsys.readouterr().out)
        names = {c["name"] for c in summary["checks"]}
        assert "lognormal_skewness_identity" in names


class TestShippedConfigs:
    def test_all_shipped_configs_validate(self):
        from elicit.config import load_config, validate_config

        paths = sorted(SWEEP_CONFIG_DIR.glob("*.json")) + sorted(
            DIAGNOSTIC_CONFIG_DIR.glob("*.json")
        )
        assert len(paths) >= 9
        for p in paths:
            validate_config(load_config(p))
