import math
import re

import pytest

from radreact import cli
from radreact.config import parse_config
from radreact.propagation import NumericalError

TINY = """[scenario]
name = absorption
[propagator]
total_time = 60
stride = 5
"""


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY)
    return path


def test_theory_subcommand(capsys, tmp_path):
    code = cli.main(["theory", "--omega-ev", "10.746", "--dipole-au", "1.048", "--inv-area", "1e-2",
                     "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "gamma_rr_ev" in out and "gamma_ww_1d_ev" in out
    summary = (tmp_path / "summary.txt").read_text()
    gamma = float(re.search(r"gamma_rr_ev = (\S+)", summary).group(1))
    assert gamma == pytest.approx(10.746 * 1.048**2 * 1e-2 * 4 * math.pi / 137.035999, rel=1e-9)


def test_theory_rejects_bad_numbers(capsys):
    assert cli.main(["theory", "--omega-ev", "-1", "--dipole-au", "1", "--inv-area", "1"]) == 2
    assert cli.main(["theory", "--omega-ev", "x", "--dipole-au", "1", "--inv-area", "1"]) == 2


def test_run_writes_outputs(tiny, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", str(tiny), "--out", str(out)]) == 0
    for name in ("trajectory.csv", "spectrum.csv", "summary.txt", "resolved.cfg"):
        assert (out / name).exists()
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,R,Rdot,E_drive,E_r,E_e,dE_rr"
    assert (out / "spectrum.csv").read_text().splitlines()[0] == "omega_au,omega_ev,re_alpha,im_alpha,sigma"
    assert parse_config((out / "resolved.cfg").read_text()) == parse_config(TINY)


def test_csv_format_is_reproducible(tiny, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", str(tiny), "--out", str(a)]) == 0
    assert cli.main(["run", str(tiny), "--out", str(b)]) == 0
    for name in ("trajectory.csv", "spectrum.csv", "summary.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    raw = (a / "trajectory.csv").read_bytes()
    assert b"\r" not in raw
    row = raw.splitlines()[5].decode().split(",")
    # 17 significant digits for anything not exactly representable in fewer
    assert any(len(re.sub(r"[-.]|e.*", "", v).lstrip("0")) == 17 for v in row)


def test_format_number():
    assert cli.format_number(0.1) == "0.10000000000000001"
    assert cli.format_number(3) == "3"
    assert cli.format_number(True) == "1"
    assert float(cli.format_number(1 / 3)) == 1 / 3


def test_invalid_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[grid]\nbogus = 3\n")
    assert cli.main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_numerical_failure_exit_code(tiny, tmp_path, monkeypatch):
    def boom(scenario):
        raise NumericalError("non-finite dipole at step 7", step=7)

    monkeypatch.setattr(cli, "run_scenario", boom)
    out = tmp_path / "o"
    assert cli.main(["run", str(tiny), "--out", str(out)]) == 3
    assert "step 7" in (out / "error.txt").read_text()


def test_sweep_table(tiny, tmp_path):
    out = tmp_path / "sweep"
    assert cli.main(["sweep", str(tiny), "--param", "inv_area", "--values", "0.5,0.25", "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("inv_area,status,")
    assert [ln.split(",")[:2] for ln in lines[1:]] == [["0.5", "0"], ["0.25", "0"]]
    assert (out / "inv_area=0.5" / "summary.txt").exists()


def test_sweep_marks_failed_rows(tiny, tmp_path, monkeypatch):
    real = cli.run_scenario

    def flaky(scenario):
        if scenario.waveguide.inv_area == 0.25:
            raise NumericalError("diverged")
        return real(scenario)

    monkeypatch.setattr(cli, "run_scenario", flaky)
    out = tmp_path / "sweep"
    code = cli.main(["sweep", str(tiny), "--param", "inv_area", "--values", "0.5 0.25", "--out", str(out)])
    assert code == 3
    rows = [ln.split(",") for ln in (out / "sweep.csv").read_text().splitlines()[1:]]
    assert rows[0][1] == "0" and rows[1][1] == "3"
    assert rows[1][2] == "nan"


def test_sweep_validation(tiny, tmp_path):
    assert cli.main(["sweep", str(tiny), "--param", "inv_area", "--values", "", "--out", str(tmp_path)]) == 2
    assert cli.main(["sweep", str(tiny), "--param", "colour", "--values", "1", "--out", str(tmp_path)]) == 2


def test_parallel_sweep_matches_serial(tiny, tmp_path, monkeypatch):
    serial, parallel = tmp_path / "s", tmp_path / "p"
    args = ["sweep", str(tiny), "--param", "n_emitters", "--values", "1,2"]
    assert cli.main(args + ["--out", str(serial)]) == 0
    monkeypatch.setenv(cli.WORKERS_ENV, "2")
    assert cli.main(args + ["--out", str(parallel)]) == 0
    assert (serial / "sweep.csv").read_bytes() == (parallel / "sweep.csv").read_bytes()
