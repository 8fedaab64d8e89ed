"""End-to-end tests of the command-line interface."""

import json
from pathlib import Path

import numpy as np
import pytest

from recovery_lab import cli
from recovery_lab import markov as mk


@pytest.fixture
def power_economy_file(tmp_path, power_economy):
    path = tmp_path / "economy.json"
    path.write_text(json.dumps(mk.economy_to_dict(power_economy)))
    return path


@pytest.fixture
def recursive_economy_file(tmp_path, recursive_economy):
    path = tmp_path / "recursive.json"
    path.write_text(json.dumps(mk.economy_to_dict(recursive_economy)))
    return path


def read_csv(path):
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [[float(tok) for tok in line.split(",")] for line in lines[1:]]
    return header, np.asarray(rows)


class TestRecover:
    def test_power_economy_round_trip(self, tmp_path, power_economy_file):
        out = tmp_path / "out"
        code = cli.main(
            ["recover", "--input", str(power_economy_file), "--out", str(out)]
        )
        assert code == 0
        payload = json.loads((out / "recovery.json").read_text())
        assert payload["eta_hat"] == pytest.approx(-0.02, abs=1e-10)
        np.testing.assert_allclose(
            payload["p_hat"], [[0.9, 0.1], [0.1, 0.9]], atol=1e-10
        )
        header, rows = read_csv(out / "decomposition.csv")
        assert header[:3] == ["i", "j", "p"]
        assert rows.shape == (4, 8)

    def test_recursive_economy_nontrivial_martingale(
        self, tmp_path, recursive_economy_file
    ):
        out = tmp_path / "out"
        assert cli.main(
            ["recover", "--input", str(recursive_economy_file), "--out", str(out)]
        ) == 0
        payload = json.loads((out / "recovery.json").read_text())
        h = np.asarray(payload["h_increments"])
        assert np.max(np.abs(h - 1.0)) > 1e-3
        assert np.max(np.abs(np.asarray(payload["p_hat"]) - [[0.9, 0.1], [0.1, 0.9]])) > 1e-3

    def test_help_exits_zero(self, capsys):
        assert cli.main(["recover", "--help"]) == 0
        assert "recover" in capsys.readouterr().out

    def test_malformed_input_exit_one(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli.main(["recover", "--input", str(bad), "--out", str(tmp_path / "o")]) == 1

    def test_nonprimitive_prices_exit_two(self, tmp_path):
        path = tmp_path / "np.json"
        path.write_text(json.dumps({"prices": [[0.0, 0.9], [0.9, 0.0]]}))
        assert cli.main(["recover", "--input", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_missing_file_exit_one(self, tmp_path):
        assert cli.main(
            ["recover", "--input", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]
        ) == 1


class TestForwardAndYields:
    def test_forward_outputs(self, tmp_path, power_economy_file):
        out = tmp_path / "fwd"
        assert cli.main(
            ["forward", "--input", str(power_economy_file), "--out", str(out),
             "--horizons", "1:5:1"]
        ) == 0
        payload = json.loads((out / "forward_measures.json").read_text())
        assert set(payload["forward"]) == {"1", "2", "3", "4", "5"}
        _, rows = read_csv(out / "forward_limit.csv")
        # distance to the recovered matrix shrinks with maturity
        assert rows[-1, 1] < rows[0, 1]

    def test_yields_outputs(self, tmp_path, recursive_economy_file):
        out = tmp_path / "yld"
        assert cli.main(
            ["yields", "--input", str(recursive_economy_file), "--out", str(out),
             "--horizons", "1:41:20"]
        ) == 0
        header, rows = read_csv(out / "yields.csv")
        assert header == ["horizon", "state", "yield_p", "yield_p_hat"]
        assert rows.shape == (6, 4)  # 3 horizons x 2 states


class TestLrr:
    def test_default_run_produces_all_files(self, tmp_path):
        out = tmp_path / "lrr"
        code = cli.main(
            ["lrr", "--out", str(out), "--seed", "1",
             "--override", "n_paths=2000", "--override", "burn_in=150",
             "--horizons", "12:240:114"]
        )
        assert code == 0
        for name in (
            "density_p.csv",
            "density_p_hat.csv",
            "density_risk_neutral.csv",
            "yields_consumption.csv",
            "yields_bond.csv",
            "lrr_summary.json",
        ):
            assert (out / name).exists(), name
        summary = json.loads((out / "lrr_summary.json").read_text())
        assert summary["pf"]["eta_hat"] < 0
        assert summary["changed_measure"]["mu_22"] < 0

    def test_gamma_one_still_has_martingale_component(self, tmp_path):
        # consumption carries a permanent component, so even log utility
        # leaves the recovered measure distinct from the physical one
        out = tmp_path / "lrr1"
        code = cli.main(
            ["lrr", "--out", str(out), "--override", "gamma=1",
             "--override", "n_paths=1000", "--override", "burn_in=100",
             "--horizons", "12:24:12"]
        )
        assert code == 0
        summary = json.loads((out / "lrr_summary.json").read_text())
        assert abs(np.asarray(summary["pf"]["alpha_h"])).max() > 1e-4
        assert summary["changed_measure"]["iota_hat"][1] != pytest.approx(1.0)

    def test_nonsense_override_exit_one(self, tmp_path):
        assert cli.main(
            ["lrr", "--out", str(tmp_path / "x"), "--override", "gamma_typo=1"]
        ) == 1

    def test_infeasible_gamma_exit_two(self, tmp_path):
        assert cli.main(
            ["lrr", "--out", str(tmp_path / "x"), "--override", "gamma=500"]
        ) == 2

    def test_reruns_byte_identical(self, tmp_path):
        args = lambda name: [
            "lrr", "--out", str(tmp_path / name), "--seed", "3",
            "--override", "n_paths=500", "--override", "burn_in=50",
            "--horizons", "12:24:12",
        ]
        assert cli.main(args("a")) == 0
        assert cli.main(args("b")) == 0
        for f in ("density_p.csv", "yields_bond.csv", "lrr_summary.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_thread_cap_does_not_change_outputs(self, tmp_path, monkeypatch):
        args = lambda name: [
            "lrr", "--out", str(tmp_path / name), "--seed", "3",
            "--override", "n_paths=500", "--override", "burn_in=50",
            "--horizons", "12:24:12",
        ]
        monkeypatch.setenv("RECOVERY_LAB_THREADS", "1")
        assert cli.main(args("serial")) == 0
        monkeypatch.setenv("RECOVERY_LAB_THREADS", "3")
        assert cli.main(args("pooled")) == 0
        for f in ("density_p.csv", "density_p_hat.csv", "lrr_summary.json"):
            assert (tmp_path / "serial" / f).read_bytes() == (
                tmp_path / "pooled" / f
            ).read_bytes()


class TestBounds:
    def test_bounds_output(self, tmp_path, recursive_economy_file):
        out = tmp_path / "bnd"
        assert cli.main(
            ["bounds", "--input", str(recursive_economy_file), "--out", str(out),
             "--theta=-1,0,1"]
        ) == 0
        payload = json.loads((out / "bounds.json").read_text())
        assert set(payload["theta"]) == {"-1.0", "0.0", "1.0"}
        for entry in payload["theta"].values():
            assert entry["lambda_bar"] > 0
            assert entry["lambda_bar"] <= entry["population_discrepancy"] + 1e-10
            assert entry["duality_gap"] <= 1e-8

    def test_unit_martingale_bounds_zero(self, tmp_path, power_economy_file):
        out = tmp_path / "bnd0"
        assert cli.main(
            ["bounds", "--input", str(power_economy_file), "--out", str(out)]
        ) == 0
        payload = json.loads((out / "bounds.json").read_text())
        for entry in payload["theta"].values():
            assert abs(entry["lambda_bar"]) <= 1e-10


class TestDemoApprox:
    def test_report_structure_and_determinism(self, tmp_path):
        overrides = ["--override", "rhos=1.0,0.01", "--override", "n_zeta=11",
                     "--override", "n_y=21"]
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert cli.main(["demo-approx", "--out", str(out_a), *overrides]) == 0
        assert cli.main(["demo-approx", "--out", str(out_b), *overrides]) == 0
        assert (out_a / "approx_residuals.csv").read_bytes() == (
            out_b / "approx_residuals.csv"
        ).read_bytes()
        report = json.loads((out_a / "approx_report.json").read_text())
        assert set(report["spectral_gaps"]) == {"1.0", "0.01"}
        # near-unit-root persistence admits more near-solutions and a
        # narrower spectral gap
        assert report["near_solutions"]["0.01"] >= report["near_solutions"]["1.0"]
        assert report["spectral_gaps"]["0.01"] < report["spectral_gaps"]["1.0"]

    def test_residual_profile_shapes(self, tmp_path):
        out = tmp_path / "r"
        assert cli.main(
            ["demo-approx", "--out", str(out), "--override", "rhos=1.0",
             "--override", "n_zeta=7", "--override", "n_y=15"]
        ) == 0
        _, rows = read_csv(out / "approx_residuals.csv")
        assert rows.shape == (7, 3)
        residuals = rows[:, 2]
        # strong reversion: residual is small only near its minimizer
        assert residuals.min() < 1e-2
        assert residuals.max() > 10 * residuals.min()
