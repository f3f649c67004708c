import csv
import dataclasses
import json
import math

import pytest

from app import EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main
from privacy.accountant import CgfLedger, compose, ledger_to_json
from privacy.amplification import SubsampledCurve
from privacy.mechanisms import gaussian_rdp

GAUSS_SPEC = '{"kind": "gaussian", "sigma": 5}'


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


class TestMech:
    def test_curve_rows(self, tmp_path):
        out = tmp_path / "mech.csv"
        assert main(["mech", "--spec", GAUSS_SPEC, "--alphas", "2:5", "--output", str(out)]) == EXIT_OK
        rows = read_csv(out)
        assert [float(r["alpha"]) for r in rows] == [2.0, 3.0, 4.0, 5.0]
        assert float(rows[0]["epsilon"]) == pytest.approx(0.04)


class TestAmplify:
    def test_full_integer_grid(self, tmp_path):
        out = tmp_path / "amplify.csv"
        argv = ["amplify", "--spec", GAUSS_SPEC, "--gamma", "0.001", "--alphas", "2:256", "--output", str(out)]
        assert main(argv) == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 256
        assert lines[0] == "alpha,general,lower"
        for row in read_csv(out):
            assert float(row["lower"]) <= float(row["general"])

    def test_fractional_orders_leave_lower_empty(self, tmp_path):
        out = tmp_path / "amplify.csv"
        argv = ["amplify", "--spec", GAUSS_SPEC, "--gamma", "0.01", "--alphas", "2.5,3", "--output", str(out)]
        assert main(argv) == EXIT_OK
        rows = read_csv(out)
        assert rows[0]["lower"] == ""
        assert rows[1]["lower"] != ""

    def test_json_format(self, tmp_path):
        out = tmp_path / "amplify.json"
        argv = [
            "amplify", "--spec", GAUSS_SPEC, "--gamma", "0.01", "--alphas", "2:3",
            "--bounds", "general,tight,asymptotic_good", "--format", "json", "--output", str(out),
        ]
        assert main(argv) == EXIT_OK
        records = json.loads(out.read_text())
        assert [r["alpha"] for r in records] == [2.0, 3.0]
        assert set(records[0]) == {"alpha", "general", "tight", "asymptotic_good"}

    def test_deterministic(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (first, second):
            argv = ["amplify", "--spec", GAUSS_SPEC, "--gamma", "0.001", "--alphas", "2:64,log:1.1:64:8", "--output", str(out)]
            assert main(argv) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    def test_malformed_spec_writes_nothing(self, tmp_path):
        out = tmp_path / "bad.csv"
        argv = ["amplify", "--spec", '{"kind": "gaussian", "sigma": }', "--gamma", "0.01", "--output", str(out)]
        assert main(argv) == EXIT_USAGE
        assert not out.exists()

    @pytest.mark.parametrize(
        "extra",
        [
            ["--gamma", "1.5"],
            ["--gamma", "0.01", "--alphas", "0.5:3"],
            ["--gamma", "0.01", "--bounds", "optimal"],
        ],
    )
    def test_usage_errors(self, tmp_path, extra):
        out = tmp_path / "bad.csv"
        assert main(["amplify", "--spec", GAUSS_SPEC, "--output", str(out)] + extra) == EXIT_USAGE
        assert not out.exists()

    def test_missing_gamma(self):
        assert main(["amplify", "--spec", GAUSS_SPEC]) == EXIT_USAGE

    def test_unknown_subcommand(self):
        assert main(["plot"]) == EXIT_USAGE


class TestCompose:
    def test_small_sweep(self, tmp_path):
        out = tmp_path / "compose.csv"
        argv = [
            "compose", "--spec", GAUSS_SPEC, "--gamma", "0.001",
            "--rounds", "1000", "--points", "5", "--output", str(out),
        ]
        assert main(argv) == EXIT_OK
        rows = read_csv(out)
        assert list(rows[0]) == [
            "k", "rdp_general", "rdp_lower", "rdp_asymptotic_bad", "rdp_asymptotic_good", "naive", "strong",
        ]
        assert [int(r["k"]) for r in rows] == [1, 6, 32, 178, 1000]
        general = [float(r["rdp_general"]) for r in rows]
        assert all(b >= a for a, b in zip(general, general[1:]))
        for row in rows:
            assert float(row["rdp_lower"]) <= float(row["rdp_general"])
            good, bad = float(row["rdp_asymptotic_good"]), float(row["rdp_asymptotic_bad"])
            assert good <= bad <= float(row["rdp_general"])

    def test_selected_baseline(self, tmp_path):
        out = tmp_path / "compose.csv"
        argv = [
            "compose", "--spec", GAUSS_SPEC, "--gamma", "0.001", "--rounds", "10",
            "--points", "2", "--baseline", "naive", "--output", str(out),
        ]
        assert main(argv) == EXIT_OK
        assert list(read_csv(out)[0]) == ["k", "rdp_general", "rdp_lower", "rdp_asymptotic_bad", "rdp_asymptotic_good", "naive"]

    def test_asymptotic_columns_only_for_gaussian(self, tmp_path):
        out = tmp_path / "compose.csv"
        argv = [
            "compose", "--spec", '{"kind": "laplace", "b": 2}', "--gamma", "0.001", "--rounds", "10",
            "--points", "2", "--output", str(out),
        ]
        assert main(argv) == EXIT_OK
        assert list(read_csv(out)[0]) == ["k", "rdp_general", "rdp_lower", "naive", "strong"]

    def test_tiny_noise_stays_finite(self, tmp_path):
        out = tmp_path / "compose.csv"
        spec = '{"kind": "gaussian", "sigma": 0.005}'
        argv = ["compose", "--spec", spec, "--gamma", "0.001", "--rounds", "10", "--points", "2", "--output", str(out)]
        assert main(argv) == EXIT_OK
        for row in read_csv(out):
            values = [float(v) for v in row.values() if v != ""]
            assert all(math.isfinite(v) for v in values)
            assert float(row["rdp_general"]) > 0


class TestConvert:
    def test_single_gaussian(self, tmp_path):
        out = tmp_path / "convert.json"
        assert main(["convert", "--spec", GAUSS_SPEC, "--delta", "1e-8", "--output", str(out)]) == EXIT_OK
        record = json.loads(out.read_text())
        assert record["eps"] == pytest.approx(1.2339, abs=1e-3)
        assert record["flags"] == []

    def test_eps_to_delta(self, tmp_path):
        out = tmp_path / "convert.json"
        assert main(["convert", "--spec", GAUSS_SPEC, "--eps", "1.2339", "--output", str(out)]) == EXIT_OK
        assert json.loads(out.read_text())["delta"] == pytest.approx(1e-8, rel=0.05)

    def test_empty_ledger(self, tmp_path):
        out = tmp_path / "convert.json"
        assert main(["convert", "--delta", "1e-5", "--output", str(out)]) == EXIT_OK
        record = json.loads(out.read_text())
        assert record["flags"] == ["infimum-limited"]
        assert record["eps"] <= 1e-10

    def test_ledger_file(self, tmp_path):
        ledger = compose(CgfLedger(), SubsampledCurve(gaussian_rdp(5.0), 0.001), 10000)
        path = tmp_path / "ledger.json"
        path.write_text(ledger_to_json(ledger))
        out = tmp_path / "convert.json"
        assert main(["convert", "--ledger", str(path), "--delta", "1e-8", "--output", str(out)]) == EXIT_OK
        assert json.loads(out.read_text())["eps"] == pytest.approx(0.3045, rel=1e-2)

    def test_subsampled_spec(self, tmp_path):
        out = tmp_path / "convert.json"
        argv = ["convert", "--spec", GAUSS_SPEC, "--gamma", "0.001", "--count", "10000", "--delta", "1e-8", "--output", str(out)]
        assert main(argv) == EXIT_OK
        assert json.loads(out.read_text())["eps"] == pytest.approx(0.3045, rel=1e-2)

    def test_needs_exactly_one_target(self):
        assert main(["convert", "--spec", GAUSS_SPEC]) == EXIT_USAGE
        assert main(["convert", "--spec", GAUSS_SPEC, "--delta", "1e-8", "--eps", "1.0"]) == EXIT_USAGE

    def test_missing_ledger_file(self, tmp_path):
        assert main(["convert", "--ledger", str(tmp_path / "none.json"), "--delta", "1e-8"]) == EXIT_USAGE


class TestVerify:
    def test_gaussian_passes(self, tmp_path):
        out = tmp_path / "verify.csv"
        argv = ["verify", "--spec", GAUSS_SPEC, "--gamma", "0.001", "--alphas", "2:64", "--output", str(out)]
        assert main(argv) == EXIT_OK
        rows = read_csv(out)
        assert len(rows) == 63
        assert all(r["pass"] == "true" for r in rows)

    def test_unsupported_mechanism(self, tmp_path):
        spec = '{"kind": "expfamily", "delta": 1, "L": 0.04, "kappa_max": 100}'
        argv = ["verify", "--spec", spec, "--gamma", "0.01", "--alphas", "2:4", "--output", str(tmp_path / "v.csv")]
        assert main(argv) == EXIT_USAGE

    def test_exit_code_for_failures(self, tmp_path, monkeypatch):
        import app

        real = app.sandwich_report

        def failing(*args, **kwargs):
            return [dataclasses.replace(r, passed=False) for r in real(*args, **kwargs)]

        monkeypatch.setattr(app, "sandwich_report", failing)
        argv = ["verify", "--spec", GAUSS_SPEC, "--gamma", "0.01", "--alphas", "2:3", "--output", str(tmp_path / "v.csv")]
        assert main(argv) == EXIT_VERIFY


class TestConfig:
    def test_file_overrides_flags(self, tmp_path):
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps({"spec": {"kind": "gaussian", "sigma": 5}, "gamma": 0.001, "alphas": "2:4"}))
        from_config, from_flags = tmp_path / "c.csv", tmp_path / "f.csv"

        argv = ["amplify", "--spec", '{"kind": "laplace", "b": 1}', "--gamma", "0.5", "--config", str(config_path)]
        assert main(argv + ["--output", str(from_config)]) == EXIT_OK
        direct = ["amplify", "--spec", GAUSS_SPEC, "--gamma", "0.001", "--alphas", "2:4", "--output", str(from_flags)]
        assert main(direct) == EXIT_OK
        assert from_config.read_text() == from_flags.read_text()

    def test_bad_config(self, tmp_path):
        config_path = tmp_path / "run.json"
        config_path.write_text("[1, 2]")
        assert main(["amplify", "--spec", GAUSS_SPEC, "--gamma", "0.01", "--config", str(config_path)]) == EXIT_USAGE
