import csv
import os
import subprocess
import sys

import pytest

from patchmeso.cli import load_config, main, parse_range
from patchmeso.errors import ConfigError


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_parse_range():
    assert parse_range("4:7", int) == [4, 5, 6, 7]
    assert parse_range("0:n-1", int, n=3) == [0, 1, 2]
    assert parse_range("0.1, 0.5") == [0.1, 0.5]
    for bad in ("a:b", "1,x", "0:n"):
        with pytest.raises(ConfigError):
            parse_range(bad, int)


def test_eig(tmp_path):
    assert main(["eig", "--out", str(tmp_path), "--n", "8", "--a", "2"]) == 0
    summary = _rows(tmp_path / "eig_summary.csv")
    assert summary[0][0] == "n" and summary[1][:2] == ["8", "2"]
    assert float(summary[1][3]) <= 1e-10 and float(summary[1][6]) <= 1e-9
    assert len(_rows(tmp_path / "eig_analytic.csv")) == len(_rows(tmp_path / "eig_numeric.csv"))


def test_evolve(tmp_path):
    assert main(["evolve", "--out", str(tmp_path), "--n", "6", "--a", "1", "--set", "schedule.M=3"]) == 0
    rows = _rows(tmp_path / "evolve.csv")
    assert len(rows) == 1 + 4 * 13
    assert max(abs(float(r[6])) for r in rows[1:]) <= 1e-8


def test_bounds_deterministic_and_skips(tmp_path, capsys):
    args = ["bounds", "--set", "sweep.n=4:5", "--set", "sweep.delta_t=0.5", "--threads", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert "skipped degenerate geometry n=4 a=1" in capsys.readouterr().err
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "1"]) == 0
    for name in ("bounds_R.csv", "bounds_E.csv"):
        assert _read(tmp_path / "a" / name) == _read(tmp_path / "b" / name)


def test_figures_penetrate(tmp_path):
    assert main(["figures", "--which", "penetrate20", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "fig_penetrate20.csv")
    assert rows[0][-1] == "R_jmax"
    assert {r[5] for r in rows[1:]} == {"1", "3", "5", "7"}
    assert main(["figures", "--which", "nonsense", "--out", str(tmp_path)]) == 2


def test_figures_vectors(tmp_path):
    assert main(["figures", "--which", "wavenum", "--out", str(tmp_path)]) == 0
    assert main(["figures", "--which", "buff", "--out", str(tmp_path)]) == 0
    assert len(_rows(tmp_path / "fig_wavenum.csv")) == 40
    assert {r[0] for r in _rows(tmp_path / "fig_buff.csv")[1:]} == {"29", "30", "31", "32"}


def test_gl2d(tmp_path):
    out = str(tmp_path)
    assert main(["gl2d", "--delta-t", "0.1", "--seed", "1", "--out", out]) == 0
    rows = _rows(tmp_path / "gl2d_macro.csv")
    assert rows[1][5:] == ["meso", "0.1", "1"]
    first = _read(tmp_path / "gl2d_macro.csv")
    assert main(["gl2d", "--delta-t", "0.1", "--seed", "1", "--out", out]) == 0
    assert _read(tmp_path / "gl2d_macro.csv") == first


def test_comms(tmp_path):
    assert main(["comms", "--out", str(tmp_path), "--set", "comms.delays=0-1:2,1-0:never"]) == 0
    summary = _rows(tmp_path / "comms_summary.csv")
    assert summary[1][4] == "128" and summary[2][4] == "25600" and summary[1][6] == "200"
    ages = {(r[0], r[1]): r[4] for r in _rows(tmp_path / "comms_meso.csv")[1:]}
    assert ages[("0", "1")] == "2" and ages[("1", "0")] == "never"


def test_unknown_key_reports_line(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[geometry]\nn = 8\nwidth = 3\n")
    assert main(["eig", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "line 3" in err and "width" in err
    cfg.write_text("[nowhere]\nx = 1\n")
    with pytest.raises(ConfigError, match="line 1"):
        load_config(str(cfg))


def test_config_file_values(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[geometry]\nn = 6\na = 2\n[coupling]\ncos_ell = 0.75\n")
    assert main(["eig", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert _rows(tmp_path / "eig_summary.csv")[1][:3] == ["6", "2", "0.75"]


def test_bad_values_exit_2(tmp_path, capsys):
    assert main(["eig", "--out", str(tmp_path), "--n", "4", "--a", "9"]) == 2
    assert main(["eig", "--out", str(tmp_path), "--set", "geometry.zz=1"]) == 2
    assert main(["eig", "--out", str(tmp_path), "--set", "geometry.n=x"]) == 2
    assert capsys.readouterr().err.count("error") == 3


def test_help_lists_flags():
    env = dict(os.environ, PYTHONPATH=os.pathsep.join(sys.path))
    out = subprocess.run([sys.executable, "-m", "patchmeso", "gl2d", "--help"], capture_output=True, text=True,
                         env=env, check=True).stdout
    for flag in ("--config", "--out", "--seed", "--which", "--delta-t", "--q", "--n", "--a", "--cos-ell",
                 "--mode", "--threads", "--set"):
        assert flag in out
