import json
import subprocess
import sys
import textwrap

import pytest

from randword.cli import main
from randword.config import TASKS, config_from_dict, parse_config
from randword.errors import ConfigError


def write(tmp_path, name, body):
    p = tmp_path / name
    p.write_text(textwrap.dedent(body).lstrip())
    return p


RENEWAL = """
    seed = 0

    [model]
    kind = "dimer"
    lam = 0.5

    [task]
    name = "renewal"
    weights = [0.5, 0.5]
    L = 60
"""

EXCEPTIONAL = """
    [model]
    kind = "dimer"
    lam = 0.5

    [task]
    name = "exceptional"
    w0 = [0.5, 0.5]
    w1 = [-0.5, -0.5]
    window = [-3.0, 3.0]
    n_scan = 401
"""


def test_renewal_run_and_byte_identical_rerun(tmp_path, capsys):
    cfg = write(tmp_path, "r.toml", RENEWAL)
    out = tmp_path / "out"
    assert main(["renewal", "--config", str(cfg), "--out", str(out)]) == 0
    data = json.loads((out / "renewal.json").read_text())
    assert abs(data["A_L"] - 2 / 3) < 1e-6
    assert data["max_generating_mismatch"] < 1e-12
    assert data["meta"]["seed"] == 0 and len(data["meta"]["config_sha256"]) == 16
    first = (out / "renewal.csv").read_bytes()
    assert first.startswith(b"# task=renewal config_sha256=")
    assert (out / "renewal.png").exists()
    assert main(["renewal", "--config", str(cfg), "--out", str(out), "--no-plot"]) == 0
    assert (out / "renewal.csv").read_bytes() == first


def test_exceptional_json(tmp_path):
    cfg = write(tmp_path, "e.toml", EXCEPTIONAL)
    out = tmp_path / "o"
    assert main(["exceptional", "--config", str(cfg), "--out", str(out), "--no-plot"]) == 0
    entries = json.loads((out / "exceptional.json").read_text())["entries"]
    energies = [e["energy"] for e in entries]
    for target in (0.5, -0.5):
        assert min(abs(e - target) for e in energies) < 1e-3
    assert all(set(e) >= {"energy", "class", "residual", "heuristic"} for e in entries)


def test_json_config_equivalent(tmp_path):
    data = {"seed": 0, "model": {"kind": "dimer", "lam": 0.5},
            "task": {"name": "renewal", "weights": [0.5, 0.5], "L": 60}}
    p = tmp_path / "r.json"
    p.write_text(json.dumps(data))
    cfg = parse_config(p)
    assert cfg.task == "renewal" and cfg.params["L"] == 60


def test_field_path_and_line_in_error(tmp_path, capsys):
    cfg = write(tmp_path, "bad.toml", """
        seed = 1

        [[model.atoms]]
        word = [1.0]
        weight = 0.5
        [[model.atoms]]
        word = [2.0]
        weight = -0.5

        [task]
        name = "renewal"
    """)
    assert main(["renewal", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "model.atoms[1].weight" in err and "line 8" in err


def test_unknown_task_lists_valid_ones():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"task": {"name": "nope"}})
    for t in TASKS:
        assert t in str(exc.value)


def test_missing_required_parameter():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"model": {"kind": "dimer", "lam": 1.0}, "task": {"name": "lyapunov"}})
    assert exc.value.path == "task.energies"


def test_stochastic_task_needs_seed(tmp_path, capsys):
    cfg = write(tmp_path, "l.toml", """
        [model]
        kind = "dimer"
        lam = 1.5

        [task]
        name = "lyapunov"
        energies = [0.0]
        n_sites = 1000
    """)
    assert main(["lyapunov", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert "seed" in capsys.readouterr().err
    assert main(["lyapunov", "--config", str(cfg), "--out", str(tmp_path / "x"), "--seed", "3", "--no-plot"]) == 0


def test_task_mismatch_and_data_error_codes(tmp_path):
    cfg = write(tmp_path, "r.toml", RENEWAL)
    assert main(["bands", "--config", str(cfg)]) == 2
    degenerate = write(tmp_path, "d.toml", EXCEPTIONAL.replace("w1 = [-0.5, -0.5]", "w1 = [0.5, 0.5]"))
    assert main(["exceptional", "--config", str(degenerate), "--out", str(tmp_path / "d")]) == 4


def test_list_examples(capsys):
    assert main(["--list-examples"]) == 0
    out = capsys.readouterr().out
    for kind in ("anderson", "single_site", "displacement", "dimer", "polymer"):
        assert kind in out


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "randword.cli", "--list-examples"], capture_output=True, text=True)
    assert r.returncode == 0 and "dimer" in r.stdout
