"""End-to-end exercises of the ringbec command line.

Everything runs in-process through cli_main so exit codes and stdio are
captured directly; no subprocesses.
"""

import json
import math
import os

import pytest

import ringbec as rb
import ringbec.cli as cli
from ringbec.cli import cli_main

QUICK = """
[params]
n_total = 1e5
lam = 100.0

[initial]
preset = "seed-imbalance(100)"

[schedule]
kind = "constant"

[integrator]
max_time = 0.5

[output]
sample_interval = 0.01
"""

CONVEYOR = """
[params]
n_total = 1e5
lam = 100.0

[initial]
preset = "single-well(0.97)"

[schedule]
kind = "conveyor"
mode = "feedback"
k_low = 0.5
k_high = 30.0
n_turns = 1
direction = 1

[integrator]
max_time = 12.0

[output]
sample_interval = 0.01
"""


def write_config(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_report(out_dir, stem="run"):
    with open(os.path.join(out_dir, f"{stem}.report.json")) as fh:
        return json.load(fh)


def test_version_flag_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        cli_main(["--version"])
    assert exc.value.code == 0
    assert rb.__version__ in capsys.readouterr().out


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli_main([])
    assert exc.value.code == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config_file_exits_two(tmp_path, capsys):
    rc = cli_main(["simulate", str(tmp_path / "absent.toml")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_bad_config_key_exits_two(tmp_path, capsys):
    path = write_config(tmp_path, QUICK.replace("lam = 100.0",
                                                "lam = 100.0\nwobble = 1"))
    rc = cli_main(["simulate", path])
    assert rc == 2
    assert "wobble" in capsys.readouterr().err


def test_simulate_writes_trajectory_and_report(tmp_path, capsys):
    path = write_config(tmp_path, QUICK)
    out = tmp_path / "out"
    rc = cli_main(["--out-dir", str(out), "simulate", path])
    assert rc == 0
    assert (out / "run.csv").exists()
    report = read_report(str(out))
    assert report["scenario"] == "simulate"
    assert report["labels"]["norm"] == "ok"
    assert report["measured"]["n_samples"] == 51
    assert len(report["measured"]["final_populations"]) == 4
    stdout = capsys.readouterr().out
    assert "run.csv" in stdout and "run.report.json" in stdout


def test_simulate_reruns_byte_identical(tmp_path):
    path = write_config(tmp_path, QUICK)
    first, second = tmp_path / "a", tmp_path / "b"
    assert cli_main(["--quiet", "--out-dir", str(first), "simulate",
                     path]) == 0
    assert cli_main(["--quiet", "--out-dir", str(second), "simulate",
                     path]) == 0
    assert ((first / "run.csv").read_bytes()
            == (second / "run.csv").read_bytes())


def test_format_flag_overrides_config(tmp_path):
    path = write_config(tmp_path, QUICK)
    out = tmp_path / "out"
    rc = cli_main(["--quiet", "--out-dir", str(out), "--format", "jsonl",
                   "simulate", path])
    assert rc == 0
    assert (out / "run.jsonl").exists()
    assert not (out / "run.csv").exists()


def test_output_path_key_names_the_file(tmp_path):
    path = write_config(tmp_path, QUICK + 'path = "custom.csv"\n')
    out = tmp_path / "out"
    assert cli_main(["--quiet", "--out-dir", str(out), "simulate", path]) == 0
    assert (out / "custom.csv").exists()


def test_quiet_silences_stdout(tmp_path, capsys):
    path = write_config(tmp_path, QUICK)
    rc = cli_main(["--quiet", "--out-dir", str(tmp_path / "o"), "simulate",
                   path])
    assert rc == 0
    assert capsys.readouterr().out == ""


def test_runtime_failure_exits_one(tmp_path, capsys):
    # rk4 at dt = 0.05 cannot track the trapped-state phase rotation:
    # either the norm drifts past budget or the step diverges outright.
    text = QUICK.replace('preset = "seed-imbalance(100)"',
                         'preset = "single-well(0.97)"')
    text = text.replace("max_time = 0.5",
                        'method = "rk4"\ndt = 0.05\nmax_time = 3.0')
    path = write_config(tmp_path, text)
    rc = cli_main(["--quiet", "--out-dir", str(tmp_path / "o"), "simulate",
                   path])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_validate_battery_passes(capsys):
    assert cli_main(["validate"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 8
    assert "FAIL" not in out
    assert "all 8 invariant checks passed" in out


def test_validate_catches_broken_polar_equations(monkeypatch, capsys):
    true_rhs = cli.rhs_polar

    def corrupted(n, theta, params, k):
        dn, dtheta = true_rhs(n, theta, params, k)
        return -dn, dtheta

    monkeypatch.setattr(cli, "rhs_polar", corrupted)
    rc = cli_main(["validate"])
    assert rc == 1
    captured = capsys.readouterr()
    assert "FAIL polar-complex-equivalence" in captured.out
    assert "error:" in captured.err


def test_conveyor_rejects_other_schedules(tmp_path, capsys):
    path = write_config(tmp_path, QUICK)
    rc = cli_main(["--quiet", "--out-dir", str(tmp_path / "o"), "conveyor",
                   path])
    assert rc == 2
    assert "conveyor" in capsys.readouterr().err


def test_conveyor_reports_transfer_fidelities(tmp_path):
    path = write_config(tmp_path, CONVEYOR)
    out = tmp_path / "out"
    rc = cli_main(["--quiet", "--out-dir", str(out), "conveyor", path])
    assert rc == 0
    assert (out / "run.csv").exists()
    report = read_report(str(out))
    assert report["scenario"] == "conveyor"
    fidelities = report["measured"]["fidelities"]
    assert len(fidelities) == 4
    assert min(fidelities) >= 0.9
    assert report["measured"]["turns"] == 1


def test_resonance_reports_measured_and_formula(tmp_path, capsys):
    text = QUICK.replace("max_time = 0.5", "max_time = 20.0")
    path = write_config(tmp_path, text)
    out = tmp_path / "out"
    rc = cli_main(["--out-dir", str(out), "resonance", path])
    assert rc == 0
    report = read_report(str(out))
    measured = report["measured"]["measured_frequency"]
    formula = report["measured"]["formula_frequency"]
    assert formula == pytest.approx(
        rb.resonance_frequency(rb.make_params(lam=100.0)))
    assert measured > 0 and math.isfinite(measured)
    assert report["measured"]["ratio"] == pytest.approx(measured / formula)
    assert "omega_R" in capsys.readouterr().out


def test_scan_threshold_report_contents(tmp_path):
    text = QUICK.replace("max_time = 0.5", "max_time = 10.0")
    path = write_config(tmp_path, text)
    out = tmp_path / "out"
    rc = cli_main(["--quiet", "--out-dir", str(out), "scan-threshold", path])
    assert rc == 0
    report = read_report(str(out))
    meas = report["measured"]
    n_upper, n_lower = rb.critical_imbalance_analytic(100.0, 1e5)
    assert meas["n_upper_analytic"] == pytest.approx(n_upper)
    assert meas["n_lower_analytic"] == pytest.approx(n_lower)
    lo, hi = meas["brackets"]["confined"]
    assert lo <= meas["n_confined_simulated"] <= hi
    assert report["labels"] == {"confined": "found", "depleted": "found"}
    assert meas["residual_confined"] == pytest.approx(
        meas["n_confined_simulated"] - n_upper)
