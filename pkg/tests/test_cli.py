import json
import subprocess
import sys

import pytest

from dqdrl.harness.cli import main


@pytest.fixture
def run_dir(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("experiment.env = gait_point\nexperiment.algorithm = map_elites\n"
                   "experiment.budget = 300\nenv.hidden = 8\n")
    assert main(["run", "--config", str(cfg), "--seed", "3", "--out",
                 str(tmp_path / "out"), "--deterministic"]) == 0
    return tmp_path / "out"


def test_run_writes_outputs(run_dir, capsys):
    for name in ("metrics.csv", "archive.csv", "summary.json", "grid.json", "config.txt",
                 "wall_time.csv"):
        assert (run_dir / name).exists()
    assert json.loads((run_dir / "summary.json").read_text())["seed"] == 3


def test_plot_and_rescore(run_dir, capsys):
    assert main(["plot", "heatmap", "--archive", str(run_dir / "archive.csv"),
                 "--out", str(run_dir / "heat")]) == 0
    assert (run_dir / "heat.svg").exists() and (run_dir / "heat.csv").exists()
    assert main(["plot", "histogram", "--archive", str(run_dir / "archive.csv"),
                 "--out", str(run_dir / "hist.csv"), "--bins", "5"]) == 0
    assert len((run_dir / "hist.csv").read_text().splitlines()) == 6
    capsys.readouterr()
    assert main(["rescore", "--archive", str(run_dir / "archive.csv"),
                 "--min-objective", "-100"]) == 0
    out = json.loads(capsys.readouterr().out)
    summary = json.loads((run_dir / "summary.json").read_text())
    assert out["coverage"] == summary["coverage"]


def test_robustness_command(run_dir, capsys):
    assert main(["robustness", "--archive", str(run_dir / "archive.csv"),
                 "--env", "gait_point", "--episodes", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["mean_elite_robustness"] == 0.0
    assert main(["robustness", "--archive", str(run_dir / "archive.csv"),
                 "--env", "gait_point", "--episodes", "3", "--obs-noise", "0.2"]) == 0


def test_bad_config_exits_2_with_all_problems(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("experiment.nope = 1\nexperiment.budget = x\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "nope" in err and "budget" in err


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "dqdrl.harness.cli", "--help"],
                         capture_output=True, text=True, check=True)
    for cmd in ("run", "plot", "rescore", "robustness"):
        assert cmd in out.stdout
