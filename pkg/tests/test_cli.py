import json
import shutil
import subprocess
import sys

import pytest

from huolab.cli import main

ISING4 = "[model]\nmodel = ising\nn_sites = 4\nJ = 1.0\nh = 0.9045\ng = 0.809\n"


def test_console_script_installed():
    exe = shutil.which("huo-lab")
    assert exe is not None
    out = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "acceptance" in out.stdout


def test_mub_pass_and_determinism(tmp_path, capsys):
    assert main(["mub", "--dim", "4", "--seed", "7", "--out", str(tmp_path / "a")]) == 0
    assert main(["mub", "--dim", "4", "--seed", "7", "--out", str(tmp_path / "b")]) == 0
    out = capsys.readouterr().out
    assert "unbiased: pass" in out
    ra = json.loads((tmp_path / "a" / "run.json").read_text())
    rb = json.loads((tmp_path / "b" / "run.json").read_text())
    assert ra["manifest"] == rb["manifest"] and ra["config_hash"] == rb["config_hash"]


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["mub", "--dim", "6", "--out", str(tmp_path / "x")]) == 2
    assert "unsupported" in capsys.readouterr().err.lower()
    bad = tmp_path / "bad.cfg"
    bad.write_text("[experiment]\nkind = evolve\nsed = 3\n[model]\nmodel = ising3d\nn_sites = 4\n[shell]\ne0 = 0\ndelta = 0\n")
    assert main(["evolve", "--config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "did you mean 'seed'" in err and "did you mean 'ising'" in err and "delta must be positive" in err
    assert main(["mub", "--dim", "4", "--tol", "unbiased"]) == 2
    assert main(["mub", "--dim", "4", "--tol", "unbiasd=1e-3"]) == 2
    with pytest.raises(SystemExit) as e:
        main(["nonsense"])
    assert e.value.code == 2


def test_failed_verdict_exits_1(tmp_path, capsys):
    # a tolerance far below rounding makes the unbiasedness verdict fail
    assert main(["mub", "--dim", "8", "--tol", "unbiased=1e-30", "--out", str(tmp_path / "m")]) == 1
    assert "unbiased: fail" in capsys.readouterr().out


def test_huo_maximize_evolve_eth_pipeline(tmp_path, capsys):
    h = tmp_path / "h.cfg"
    h.write_text(ISING4)
    init = tmp_path / "init.cfg"
    init.write_text("[state]\nprofile = uniform-phase-random\nseed = 3\n[shell]\ne0 = 0.0\ndelta = 2.0\n")
    o = tmp_path / "huo.d"
    assert main(["huo", "--hamiltonian", str(h), "--method", "fourier", "--spectrum", "degenerate:4", "--out", str(o)]) == 0
    assert (o / "phases.csv").exists() and (o / "observable.json").exists()
    assert main(["maximize", "--observable", str(o), "--hamiltonian", str(h), "--energy", "-1.5",
                 "--out", str(tmp_path / "eq.json")]) == 0
    eq = json.loads((tmp_path / "eq.json").read_text())
    assert eq["linear_relation_gap"] <= 1e-6
    code = main(["evolve", "--hamiltonian", str(h), "--state", str(init), "--observable", str(o), "--tmax", "1e4",
                 "--out", str(tmp_path / "trace.csv")])
    assert code == 0
    assert "de_equals_mc: pass" in capsys.readouterr().out
    assert main(["eth", "--observable", str(o), "--hamiltonian", str(h), "--scan-dims", "16..128",
                 "--n-pairs", "500", "--out", str(tmp_path / "eth")]) == 0
    assert (tmp_path / "eth" / "scaling.csv").exists()


def test_entropy_single_record(tmp_path, capsys):
    import numpy as np

    from huolab.io import write_matrix

    write_matrix(tmp_path / "s.dump", np.diag([0.5, 0.5]))
    write_matrix(tmp_path / "b.dump", np.eye(2))
    assert main(["entropy", "--state", str(tmp_path / "s.dump"), "--basis", str(tmp_path / "b.dump"), "--bits",
                 "--out", str(tmp_path / "e")]) == 0
    line = capsys.readouterr().out.splitlines()[0]
    rec = json.loads(line)
    assert abs(rec["H"] - 1.0) < 1e-15 and rec["units"] == "bits" and rec["dim"] == 2


def test_acceptance_subset_lines(tmp_path, capsys):
    assert main(["acceptance", "--checks", "10", "--out", str(tmp_path / "acc")]) == 0
    assert "[PASS] 10_gibbs_identity" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "huolab.cli", "mub", "--dim", "3", "--out", str(tmp_path / "m")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
