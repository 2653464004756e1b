import json
import re
import subprocess
import sys

import pytest

from fracpde import cli
from fracpde.fdm import SimulationError
from fracpde.scenario import default_config, parse_config_text


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(default_config().replace(nx=41, nt=201).to_text())
    return path


def test_bound_with_zero_source_prints_zero(capsys):
    code, out, _ = run(capsys, "bound", "--q", "zero")
    assert code == 0 and out.strip() == "0"


def test_bound_positive(capsys):
    code, out, _ = run(capsys, "bound", "--q", "sine 1 1", "--r", "2", "--umax", "0.1", "--alpha", "0.5")
    assert code == 0 and float(out) > 0.1


def test_verify_kernel(capsys):
    code, out, _ = run(capsys, "verify-kernel", "--m", "1", "--alpha", "0.5")
    assert code == 0
    worst = float(re.search(r"max residual (\S+)", out).group(1))
    assert worst < 1e-12


def test_green_point_and_profile(capsys, tmp_path):
    code, out, _ = run(capsys, "green", "--alpha", "1", "--t", "0.25", "--x", "0", "--profile", "-1", "1", "11",
                       "--out", str(tmp_path))
    assert code == 0
    assert "G(0, 0.25) = 0.564189583547" in out
    lines = (tmp_path / "green_profile.csv").read_text().splitlines()
    assert lines[0] == "x\tG" and len(lines) == 12


def test_green_bad_time(capsys):
    code, _, err = run(capsys, "green", "--t", "0")
    assert code == 2 and "configuration error" in err


@pytest.mark.parametrize("argv", [["frobnicate"], ["track", "--no-such-flag"]])
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_no_subcommand(capsys):
    code, _, err = run(capsys)
    assert code == 2 and "usage" in err


def test_missing_config(capsys, tmp_path):
    code, _, err = run(capsys, "--config", str(tmp_path / "nope.cfg"), "track")
    assert code == 2 and "cannot read" in err


def test_invalid_config(capsys, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[params]\nalpha = 3\n")
    code, _, err = run(capsys, "closed-loop", "--config", str(bad))
    assert code == 2


def test_numerical_failure_exit_code(capsys, monkeypatch, small_cfg):
    def boom(*a, **k):
        raise SimulationError("non-finite state at t=0.1")

    monkeypatch.setattr(cli, "run_scenario", boom)
    code, _, err = run(capsys, "track", "--config", str(small_cfg))
    assert code == 3 and "numerical failure" in err


def test_track_writes_run_directory(capsys, tmp_path, small_cfg):
    out = tmp_path / "run"
    code, stdout, _ = run(capsys, "--seed", "5", "track", "--config", str(small_cfg), "--out", str(out), "--sigma", "0.01")
    assert code == 0 and "e_late_ratio" in stdout
    report = json.loads((out / "report.json").read_text())
    cfg = parse_config_text(report["config"])
    assert cfg.seed == 5 and cfg.sigma == 0.01
    assert {p.name for p in out.iterdir()} >= {"field.csv", "tracking.csv", "report.json", "plot.py"}


def test_closed_loop_and_plots(capsys, tmp_path, small_cfg):
    out = tmp_path / "cl"
    assert run(capsys, "closed-loop", "--config", str(small_cfg), "--out", str(out))[0] == 0
    assert (out / "observer.csv").exists()
    (out / "plot.py").unlink()
    code, stdout, _ = run(capsys, "plots", str(out))
    assert code == 0 and (out / "plot.py").exists()
    assert run(capsys, "plots", str(tmp_path))[0] == 2


def test_config_subcommand_round_trip(capsys, tmp_path):
    code, out, _ = run(capsys, "config", "--seed", "9")
    assert code == 0 and parse_config_text(out).seed == 9
    target = tmp_path / "c.cfg"
    assert run(capsys, "config", "--out", str(target))[0] == 0
    assert parse_config_text(target.read_text()) == default_config()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fracpde", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "fracpde" in res.stdout
