from __future__ import annotations

import json
import subprocess
import sys

from mlqtt.cli import main


def test_run_exit_code_and_output(tmp_path, capsys):
    assert main(["run", "--method", "CT", "--problem", "fisher_kpp", "--qx", "4", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "2^4 x 2^4" in out
    assert (tmp_path / "run.csv").exists()


def test_config_file_and_set(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_iter": 1, "eps_newton": 1e-14}))
    code = main(["run", "--method", "SL", "--problem", "fisher_kpp", "--qx", "4", "--config", str(cfg)])
    assert code == 1
    code = main(["run", "--method", "SL", "--problem", "fisher_kpp", "--qx", "4", "--config", str(cfg),
                 "--set", "n_iter=20", "--set", "eps_newton=1e-5"])
    assert code == 0


def test_bad_inputs_exit_2(tmp_path, capsys):
    assert main(["run", "--problem", "fisher_kpp", "--qx", "3", "--set", "bogus=1"]) == 2
    assert main(["run", "--problem", "fisher_kpp", "--qx", "3", "--set", "novalue"]) == 2
    nested = tmp_path / "n.json"
    nested.write_text(json.dumps({"dmrg": {"chi": 3}}))
    assert main(["run", "--problem", "fisher_kpp", "--qx", "3", "--config", str(nested)]) == 2
    assert main(["study", "--problem", "fisher_kpp", "--qx", "3", "4", "--method", "CT"]) == 2
    assert main(["study", "--problem", "fisher_kpp", "--qx", "3", "4", "5", "--method", "QQ"]) == 2
    assert "error:" in capsys.readouterr().err


def test_study_prints_slope(capsys):
    code = main(["study", "--problem", "fisher_kpp", "--method", "CT", "--qx", "6", "6", "6", "--qt", "3", "4", "5"])
    assert code == 0
    assert "fitted temporal order CT" in capsys.readouterr().out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "mlqtt", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "table" in r.stdout
