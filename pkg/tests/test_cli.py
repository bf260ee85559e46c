import csv
import json
import subprocess
import sys

import pytest

from hjadjoint.cli import main
from hjadjoint.harness import ADJOINT_COLUMNS, COLUMNS, TOY_COLUMNS, TRAJECTORY_COLUMNS


def _header(path):
    with open(path, newline="") as fh:
        return tuple(next(csv.reader(fh)))


def test_identities(tmp_path, capsys):
    assert main(["identities", "--n", "32", "--trials", "10", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out
    assert _header(tmp_path / "identities.csv") == ("identity", "abs_residual", "scaled_residual")
    assert json.loads((tmp_path / "manifest.json").read_text())["command"] == "identities"


def test_toy(tmp_path, capsys):
    assert main(["toy", "--out", str(tmp_path)]) == 0
    assert _header(tmp_path / "toy.csv") == TOY_COLUMNS
    assert json.loads((tmp_path / "manifest.json").read_text())["results"]["slope"] >= 0.9
    assert "[PASS] toy slope" in capsys.readouterr().out


def test_toy_custom_list(tmp_path):
    assert main(["toy", "--n", "64", "--h-list=-1/8,-1/16,-1/32", "--out", str(tmp_path)]) == 0


def test_solve(tmp_path):
    assert main(["solve", "--n", "32", "--m", "2", "--T", "0.25", "--out", str(tmp_path)]) == 0
    assert _header(tmp_path / "trajectory.csv") == TRAJECTORY_COLUMNS
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "solve" and man["results"]["nsteps"] > 0


def test_solve_rk4_reports_info(tmp_path, capsys):
    assert main(["solve", "--n", "32", "--T", "0.1", "--integrator", "rk4", "--out", str(tmp_path)]) == 0
    assert "[INFO]" in capsys.readouterr().out


@pytest.mark.parametrize("terminal", ["dirac", "uniform"])
def test_adjoint(tmp_path, terminal):
    args = ["adjoint", "--n", "32", "--T", "0.25", "--flux", "cl", "--trials", "3", "--terminal", terminal]
    assert main(args + ["--out", str(tmp_path)]) == 0
    assert _header(tmp_path / "adjoint.csv") == ADJOINT_COLUMNS
    res = json.loads((tmp_path / "manifest.json").read_text())["results"]
    assert res["max_mass_error"] <= 1e-12


def test_converge_with_svg(tmp_path):
    args = ["converge", "--h-list", "16:1,32:1,64:1", "--T", "0.25", "--svg", "--out", str(tmp_path)]
    assert main(args) == 0
    assert _header(tmp_path / "convergence.csv") == COLUMNS
    assert (tmp_path / "convergence.svg").exists()
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["oracle"] == "hopf_lax" and 0.45 <= man["results"]["slope"] <= 1.1


def test_converge_from_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nT = 0.25\nh_list = 16:1, 32:1, 64:1\nenergies = false\n")
    assert main(["converge", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["config"]["T"] == 0.25 and man["config"]["energies"] is False


def test_converge_assertion_failure_exits_1(tmp_path, capsys):
    # a large smoothing width leaves an O(eps) consistency error, so the slope collapses
    args = ["converge", "--flux", "smoothed:2", "--h-list", "16:1,32:1,64:1", "--T", "0.25"]
    assert main(args + ["--out", str(tmp_path)]) == 1
    assert "[FAIL] slope" in capsys.readouterr().out


def test_hderiv(tmp_path):
    assert main(["hderiv", "--n", "256", "--m-list", "8", "--T", "0.1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "hderiv.csv").exists()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["solve", "--n", "abc"],
        ["solve", "--flux", "weno"],
        ["solve", "--n", "8", "--m", "9"],
        ["adjoint", "--integrator", "rk4"],
        ["converge", "--config", "/nonexistent/file.cfg"],
        ["hderiv", "--n", "64", "--m-list", "4"],
    ],
)
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)] if argv else argv) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "hjadjoint", "identities", "--n", "16", "--trials", "2", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert r.returncode == 0 and "[PASS]" in r.stdout
    r = subprocess.run([sys.executable, "-m", "hjadjoint", "nope"], capture_output=True, text=True)
    assert r.returncode == 2
