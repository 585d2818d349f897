"""Command-line interface: subcommands, flags, outputs and exit codes."""
import json
import subprocess
import sys

import pytest

from hermlil.cli import main

FAST = ["--set", "M=50", "--set", "decay_ns=64,128", "--set", "comparison_reps=1",
        "--set", "comparison_points=32", "--set", "lil_N=256", "--set", "lil_replicates=1",
        "--set", "m_range=4,5", "--set", "ns=1024,2048", "--set", "simulate_n=8"]


class TestExitCodes:
    def test_passing_audit(self, tmp_path):
        assert main(["cross-cov", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "cross-cov.csv").read_text().startswith("m,i,j,")

    def test_failing_audit(self, tmp_path):
        assert main(["variance-table", "--set", "H=0.9", "--out", str(tmp_path)]) == 2

    @pytest.mark.parametrize("argv", [
        [],
        ["nope"],
        ["audit", "--format", "xml"],
        ["audit", "--seed", "-1"],
        ["audit", "--threads", "0"],
        ["audit", "--set", "novalue"],
        ["audit", "--set", "unknown_key=1"],
        ["audit", "--config", "/nonexistent/config.ini"],
    ])
    def test_usage_errors(self, argv, capsys):
        assert main(argv) == 1
        assert "hermlil" in capsys.readouterr().err

    def test_runtime_error(self):
        assert main(["simulate", "--set", "model=explicit", "--set", "rho=1 0.9", "--set", "zero_fill=true"]) == 1

    def test_regime_error(self):
        assert main(["variance-table", "--set", "variance_regime=breuer_major"]) == 1

    def test_console_module(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "hermlil.cli", "cross-cov", "--format", "json"],
                              capture_output=True, text=True, cwd=tmp_path)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["passed"] is True


class TestOutputs:
    def test_json_report_schema(self, tmp_path):
        assert main(["variance-table", "--set", "ns=1024", "--format", "json", "--out", str(tmp_path)]) == 2
        rep = json.loads((tmp_path / "variance-table.json").read_text())
        assert {"name", "passed", "rule", "params", "summary", "columns", "rows", "components"} <= set(rep)

    def test_audit_writes_component_tables(self, tmp_path):
        main(["audit", *FAST, "--out", str(tmp_path)])
        names = sorted(p.name for p in tmp_path.iterdir())
        assert "audit.csv" in names and "audit_A1-variance.csv" in names and "audit_cross-cov.csv" in names

    def test_simulate_csv(self, tmp_path, capsys):
        assert main(["simulate", *FAST, "--seed", "5"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "seed,replicate,n," + ",".join(f"Z_{k}" for k in range(8))
        assert out[1].startswith("5,0,8,")

    def test_seed_changes_output(self, capsys):
        main(["simulate", *FAST, "--seed", "1"])
        a = capsys.readouterr().out
        main(["simulate", *FAST, "--seed", "2"])
        assert capsys.readouterr().out != a

    def test_threads_do_not_change_results(self, tmp_path):
        main(["distance-decay", *FAST, "--threads", "1", "--out", str(tmp_path / "a")])
        main(["distance-decay", *FAST, "--threads", "2", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "distance-decay.csv").read_bytes() == (tmp_path / "b" / "distance-decay.csv").read_bytes()

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[experiment]\nmodel = white\nq = 1\nns = 1024\nvariance_regime = exact\n")
        assert main(["variance-table", "--config", str(cfg), "--out", str(tmp_path)]) == 0
