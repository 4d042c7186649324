import csv
import json

import pytest

from wpmelab.errors import NumericError
from wpmelab.harness import cli


def run(argv, capsys):
    code = cli.run_cli(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help_and_usage_errors(capsys):
    assert run(["--help"], capsys)[0] == 0
    assert run([], capsys)[0] == 2
    assert run(["bogus"], capsys)[0] == 2
    assert run(["experiment", "nope"], capsys)[0] == 2
    assert run(["solve", "--threads", "0"], capsys)[0] == 2


def test_config_errors_exit_2(tmp_path, capsys):
    code, _, err = run(["solve", "--config", str(tmp_path / "missing.ini")], capsys)
    assert code == 2 and "not found" in err
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nM = 4\n")
    assert run(["solve", "--config", str(bad), "--out", str(tmp_path)], capsys)[0] == 2


def test_solve_writes_trajectory(tmp_path, capsys):
    ini = tmp_path / "s.ini"
    ini.write_text("[grid]\nM = 64\nR_max = 20\n[solver]\nt_end = 0.2\n")
    code, out, _ = run(["solve", "--config", str(ini), "--out", str(tmp_path)], capsys)
    assert code == 0 and "steps" in out
    payload = json.loads((tmp_path / "solve" / "trajectory.json").read_text())
    assert payload["times"][-1] == pytest.approx(0.2)
    with open(tmp_path / "solve" / "snapshots.csv") as fh:
        assert next(csv.reader(fh)) == ["time", "radius", "value"]
    with open(tmp_path / "solve" / "traces.csv") as fh:
        assert next(csv.reader(fh))[0] == "time"


def test_profile_and_norms(tmp_path, capsys):
    ini = tmp_path / "p.ini"
    ini.write_text("[datum]\nkind = profile\nbeta = 2\nT = 1\n[grid]\nR_max = 100\nM = 200\n")
    assert run(["profile", "--config", str(ini), "--out", str(tmp_path)], capsys)[0] == 0
    meta = json.loads((tmp_path / "profile" / "profile.json").read_text())
    assert meta["beta"] == 2.0 and meta["residual"] < 1e-8
    with open(tmp_path / "profile" / "profile.csv") as fh:
        assert next(csv.reader(fh)) == ["radius", "W", "V"]
    code, out, _ = run(["norms", "--config", str(ini), "--out", str(tmp_path)], capsys)
    assert code == 0 and "norm_1r" in out
    norms = json.loads((tmp_path / "norms" / "norms.json").read_text())["norms"]
    assert {"norm_1r", "norm_pr", "norm_inf_r", "cutoff_norm_pr", "ell", "limsup"} <= set(norms)


def test_profile_needs_profile_datum(tmp_path, capsys):
    assert run(["profile", "--out", str(tmp_path)], capsys)[0] == 2


def test_experiment_pass_and_env_output(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("WPME_OUT", str(tmp_path / "env"))
    code, out, _ = run(["experiment", "bc_monotonicity", "--seed", "5"], capsys)
    assert code == 0 and out.count("[PASS]") == 5
    report = json.loads((tmp_path / "env" / "bc_monotonicity" / "report.json").read_text())
    assert report["passed"] and report["inputs"]["seed"] == 5


def test_experiment_failure_exits_1(tmp_path, capsys):
    ini = tmp_path / "f.ini"
    ini.write_text("[experiment]\nslope_tol = 1e-6\n[grid]\nR_max = 1000\nM = 1000\n")
    code, out, _ = run(["experiment", "elliptic_profile", "--config", str(ini),
                        "--out", str(tmp_path)], capsys)
    assert code == 1 and "[FAIL]" in out


def test_numeric_failure_exits_3(tmp_path, capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise NumericError("Newton did not converge", dt=0.1)

    monkeypatch.setattr(cli, "solve", boom)
    code, _, err = run(["solve", "--out", str(tmp_path)], capsys)
    assert code == 3 and "numeric failure" in err


def test_calibrate(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[grid]\nM = 300\n")
    code, out, _ = run(["calibrate", "--config", str(ini), "--out", str(tmp_path),
                        "--threads", "2"], capsys)
    assert code == 0 and "C1 upper bound" in out
    assert (tmp_path / "calibrate" / "report.json").is_file()


def test_console_entry_point(tmp_path):
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "wpmelab", "experiment", "nope"],
                         capture_output=True, text=True)
    assert res.returncode == 2
