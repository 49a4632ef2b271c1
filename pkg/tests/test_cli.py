import numpy as np

from concset.cli import FAIL, FAULT, PASS, main
from concset.energy import Field
from concset.io import write_snapshot


def test_spectrum(capsys):
    assert main(["spectrum"]) == PASS
    out = capsys.readouterr().out
    assert "ell    1" in out and "-7.26" in out


def test_bad_config_is_a_fault(tmp_path, capsys):
    p = tmp_path / "c.cfg"
    p.write_text("grid.nx = 64\nnot.a.key = 1\n")
    assert main(["spectrum", "--config", str(p)]) == FAULT
    assert "unknown key" in capsys.readouterr().err


def test_minmax_small(tmp_path, capsys):
    p = tmp_path / "c.cfg"
    p.write_text(f"grid.nx = 64\ngrid.ny = 64\neps = 0.03\nT = 0.01\nflat.every = 500\noutput.dir = {tmp_path / 'out'}\n")
    code = main(["minmax", "--config", str(p)])
    assert code in (PASS, FAIL)
    assert (tmp_path / "out" / "trace.tsv").exists()
    assert (tmp_path / "out" / "diagnostics.tsv").exists()


def test_flatnorm(tmp_path, capsys):
    u = np.where(np.arange(64) < 32, 1.0, -1.0)[:, None] * np.ones((1, 64))
    write_snapshot(tmp_path / "a.bin", Field("AC", u, 0.05), 0.0)
    write_snapshot(tmp_path / "b.bin", Field("AC", np.roll(u, 8, axis=0), 0.05), 0.0)
    assert main(["flatnorm", str(tmp_path / "a.bin"), str(tmp_path / "b.bin"), "--metric-a", "0"]) == PASS
    assert abs(float(capsys.readouterr().out) - 0.25) < 1e-12


def test_vortex_gl_fail_exit_code(capsys):
    # energies increase when eps decreases in this order
    assert main(["vortex-gl", "--eps", "0.02", "0.05", "--n", "200"]) == FAIL


def test_vortex_ymh(tmp_path, capsys):
    assert main(["vortex-ymh", "--out", str(tmp_path / "p.tsv")]) == PASS
    assert (tmp_path / "p.tsv").read_text().startswith("r\tf\ta")


def test_antipodal(capsys):
    assert main(["antipodal", "--n", "256", "--d0", "0.45", "--T", "0.01"]) == PASS
