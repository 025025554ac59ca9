import json
import math

import pytest

from qfields.cli import run
from qfields.verify import load_report


def run_capture(capsys, argv):
    code = run(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


GAUSS_ARGS = ["--rho", "0.5", "--A", "0.16", "--B", "0.32", "--C", "0.6", "--D", "0"]


class TestClassify:
    def test_gaussian_point(self, capsys):
        code, out, _ = run_capture(capsys, ["classify", *GAUSS_ARGS])
        assert code == 0
        assert out.splitlines()[0] == "ExistsGaussian"

    def test_json_mode(self, capsys):
        code, out, _ = run_capture(capsys, ["classify", *GAUSS_ARGS, "--json"])
        assert code == 0
        assert json.loads(out)["classification"] == "ExistsGaussian"

    def test_invalid_exit_two(self, capsys):
        code, out, _ = run_capture(
            capsys, ["classify", "--rho", "0", "--A", "0.16", "--B", "0.32",
                     "--C", "0.68", "--D", "0"])
        assert code == 2
        assert out.startswith("InvalidParams")

    def test_qgaussian_payload(self, capsys):
        code, out, _ = run_capture(
            capsys, ["classify", "--rho", "0.5", "--A", "0.1976470588235294",
                     "--B", "0.16", "--C", "0.5647058823529412", "--D", "0", "--json"])
        assert code == 0
        data = json.loads(out)
        assert data["classification"] == "ExistsQGaussian"
        assert data["q"] == pytest.approx(0.0625, abs=1e-9)


class TestDerive:
    def test_fill_from_b(self, capsys):
        code, out, _ = run_capture(capsys, ["derive", "--rho", "0.5", "--B", "0.32", "--json"])
        assert code == 0
        data = json.loads(out)
        assert data["q"] == pytest.approx(1.0, abs=1e-12)
        assert data["A"] == pytest.approx(0.16, abs=1e-12)
        assert data["C"] == pytest.approx(0.6, abs=1e-12)

    def test_fill_from_q(self, capsys):
        code, out, _ = run_capture(capsys, ["derive", "--rho", "0.5", "--q", "0.0625", "--json"])
        data = json.loads(out)
        assert code == 0
        assert data["B"] == pytest.approx(0.16, abs=1e-12)

    def test_mutually_exclusive(self, capsys):
        code, _, err = run_capture(capsys, ["derive", "--rho", "0.5", "--B", "0.1", "--q", "0.5"])
        assert code == 1
        assert "usage error" in err

    def test_pole_is_validation_failure(self, capsys):
        code, _, err = run_capture(capsys, ["derive", "--rho", "0.5", "--q", "16"])
        assert code == 2
        assert "validation failure" in err


class TestBoundaryAndCoeffs:
    def test_boundary_json(self, capsys):
        code, out, _ = run_capture(capsys, ["boundary", "--rho", "0.5", "--mmax", "3", "--json"])
        data = json.loads(out)
        assert code == 0
        assert data["degenerate"] == pytest.approx(-2.4, abs=1e-12)
        assert data["continuum_sup"] == pytest.approx(0.32, abs=1e-12)
        assert data["lattice"]["1"] == pytest.approx(1.0, abs=1e-12)

    def test_coeffs(self, capsys):
        code, out, _ = run_capture(capsys, ["coeffs", *GAUSS_ARGS, "--json"])
        data = json.loads(out)
        assert code == 0
        assert data["alpha1"] == pytest.approx(0.25, abs=1e-12)
        assert data["gamma1"] == pytest.approx(0.75, abs=1e-12)
        assert abs(data["r1"]) <= 1e-12

    def test_coeffs_degenerate_exit_two(self, capsys):
        code, _, err = run_capture(
            capsys, ["coeffs", "--rho", "0.5", "--A", "0.8", "--B", "-2.4",
                     "--C", "0", "--D", "0"])
        assert code == 2


class TestFavard:
    def test_lattice_string(self, capsys):
        code, out, _ = run_capture(capsys, ["favard", "--rho", "0.5", "--q", "4", "--nmax", "100"])
        assert code == 0
        assert out.strip() == "TerminatesAt n=2 (lattice m=1)"

    def test_fails_string(self, capsys):
        _, out, _ = run_capture(capsys, ["favard", "--rho", "0.5", "--q", "3", "--nmax", "100"])
        assert out.strip() == "FailsAt n=3"

    def test_all_positive(self, capsys):
        _, out, _ = run_capture(capsys, ["favard", "--rho", "0.5", "--q", "0.5", "--nmax", "50"])
        assert out.strip() == "AllPositive"


class TestDensity:
    def test_writes_csv(self, capsys, tmp_path):
        out_path = tmp_path / "dens.csv"
        code, out, _ = run_capture(
            capsys, ["density", "--q", "0", "--out", str(out_path), "--points", "129"])
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert lines[0] == "x,f"
        assert len(lines) == 130
        mid = lines[65].split(",")
        assert float(mid[0]) == pytest.approx(0.0, abs=1e-12)
        assert float(mid[1]) == pytest.approx(1.0 / math.pi, abs=1e-12)


class TestKernelCheck:
    def test_mehler_pass(self, capsys):
        code, out, _ = run_capture(
            capsys, ["kernel-check", "--rho", "0.5", "--q", "0.5", "--json"])
        data = json.loads(out)
        assert code == 0
        assert data["pass"] is True
        assert data["eigen_max"] <= 1e-6

    def test_gaussian_route(self, capsys):
        code, out, _ = run_capture(capsys, ["kernel-check", "--rho", "0.6", "--q", "1", "--json"])
        data = json.loads(out)
        assert code == 0
        assert data["pass"] is True


class TestSampleVerify:
    def test_end_to_end(self, capsys, tmp_path):
        csv_path = tmp_path / "g.csv"
        code, _, _ = run_capture(
            capsys, ["sample", "--rho", "0.5", "--case", "gaussian", "--chains", "30",
                     "--steps", "400", "--seed", "7", "--out", str(csv_path)])
        assert code == 0
        report_path = tmp_path / "rep.json"
        code, _, _ = run_capture(
            capsys, ["verify", "--in", str(csv_path), *GAUSS_ARGS,
                     "--report", str(report_path), "--seed", "7"])
        assert code == 0
        rep = load_report(str(report_path))
        assert rep["summary"]["n_fail"] == 0
        assert rep["meta"]["seed"] == 7
        assert rep["meta"]["classification"] == "ExistsGaussian"

    def test_verify_corrupted_exit_three(self, capsys, tmp_path):
        csv_path = tmp_path / "g.csv"
        run_capture(capsys, ["sample", "--rho", "0.5", "--case", "gaussian", "--chains", "30",
                             "--steps", "400", "--seed", "7", "--out", str(csv_path)])
        code, out, _ = run_capture(
            capsys, ["verify", "--in", str(csv_path), "--rho", "0.5", "--A", "0.3",
                     "--B", "0.32", "--C", "0.32", "--D", "0"])
        assert code == 3
        rep = json.loads(out)
        assert rep["summary"]["n_fail"] >= 1

    def test_sample_config_file(self, capsys, tmp_path):
        cfg = {"rho": 0.5, "case": "scaled",
               "radial": [[math.sqrt(2.0), 0.5], [0.0, 0.5]],
               "n_chains": 5, "n_steps": 50, "seed": 9}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out_path = tmp_path / "s.csv"
        code, out, _ = run_capture(
            capsys, ["sample", "--config", str(cfg_path), "--out", str(out_path)])
        assert code == 0
        assert "ExistsScaledTwoPoint" in out
        assert out_path.exists()

    def test_conflicting_case_override_rejected(self, capsys, tmp_path):
        code, _, err = run_capture(
            capsys, ["sample", "--rho", "0.5", "--case", "gaussian", "--q", "0.5",
                     "--chains", "2", "--steps", "10", "--seed", "1",
                     "--out", str(tmp_path / "x.csv")])
        assert code == 1
        assert "conflicts" in err

    def test_sample_open_lattice_exit_two(self, capsys, tmp_path):
        code, _, err = run_capture(
            capsys, ["sample", "--rho", "0.5", "--q", "4", "--chains", "2",
                     "--steps", "10", "--seed", "1", "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "open" in err

    def test_radial_flag_parsing(self, capsys, tmp_path):
        out_path = tmp_path / "s.csv"
        code, _, _ = run_capture(
            capsys, ["sample", "--rho", "0.5", "--case", "scaled",
                     "--radial", f"{math.sqrt(2.0)}:0.5,0:0.5",
                     "--chains", "4", "--steps", "20", "--seed", "2",
                     "--out", str(out_path)])
        assert code == 0


class TestUsageErrors:
    def test_no_command(self, capsys):
        code, _, err = run_capture(capsys, [])
        assert code == 1
        assert "usage error" in err

    def test_unknown_command(self, capsys):
        code, _, _ = run_capture(capsys, ["frobnicate"])
        assert code == 1

    def test_missing_required(self, capsys):
        code, _, err = run_capture(capsys, ["classify", "--rho", "0.5"])
        assert code == 1
        assert "hint" in err

    def test_help_exits_zero(self, capsys):
        assert run(["--help"]) == 0
        assert run(["classify", "--help"]) == 0


class TestDeterministicOutputs:
    def test_same_argv_same_bytes(self, capsys, tmp_path, monkeypatch):
        outs = []
        for w in ("1", "4"):
            monkeypatch.setenv("BRYC_THREADS", w)
            for rep in range(2):
                csv_path = tmp_path / f"g_{w}_{rep}.csv"
                run_capture(capsys, ["sample", "--rho", "0.5", "--case", "gaussian",
                                     "--chains", "10", "--steps", "100", "--seed", "11",
                                     "--out", str(csv_path)])
                outs.append(csv_path.read_bytes())
        assert len(set(outs)) == 1
