import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from ifpp.cli import DEFAULTS, config_hash, main

FAST = {"dx": 0.01, "dt": 1e-3, "level": 7, "mc_paths": 20_000, "mc_dt": 1e-2}


@pytest.fixture
def files(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "bm", "x0": 1.0}))
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(FAST))
    b = tmp_path / "b.csv"
    b.write_text("t,b\n0,0\n1,0\n")
    return tmp_path, spec, cfg, b


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_bench(tmp_path):
    for case in ("const", "linear", "exp"):
        out = tmp_path / f"{case}.csv"
        assert main(["bench", "--case", case, "--out", str(out)]) == 0
        data = rows(out)
        assert data[0] == ["t", "p"] and float(data[1][1]) == 1.0
    assert abs(float(rows(tmp_path / "const.csv")[-1][1]) - 0.6826894921370859) < 1e-15


def test_landmarks(files):
    d, _, _, b = files
    out = d / "lm.csv"
    assert main(["landmarks", "--boundary", str(b), "--level", "1", "--max-level", "2",
                 "--out", str(out)]) == 0
    data = rows(out)
    assert data[0] == ["n", "i", "t", "bstar"] and len(data) == 1 + 2 + 4


def test_direct_with_fields_and_report(files):
    d, spec, cfg, b = files
    out, rep = d / "p.csv", d / "r.json"
    args = ["direct", "--spec", str(spec), "--boundary", str(b), "--level", "5", "--config",
            str(cfg), "--out", str(out), "--report", str(rep), "--dump-fields", str(d / "f")]
    assert main(args) == 0
    p = np.array([[float(v) for v in r] for r in rows(out)[1:]])
    assert p[0, 0] == 0.0 and p[0, 1] == 1.0 and np.all(np.diff(p[:, 1]) <= 1e-14)
    assert (d / "f" / "U.csv").exists() and (d / "f" / "w.csv").exists()
    doc = json.loads(rep.read_text())
    assert set(DEFAULTS) <= set(doc["config"]) and len(doc["config_hash"]) == 64
    assert main(args[:-2]) == 0
    assert json.loads(rep.read_text())["config_hash"] == doc["config_hash"]


def test_inverse_report(files):
    d, spec, cfg, _ = files
    main(["bench", "--case", "const", "--out", str(d / "p.csv")])
    out, rep = d / "b.csv", d / "r.json"
    assert main(["inverse", "--spec", str(spec), "--survival", str(d / "p.csv"), "--config",
                 str(cfg), "--out", str(out), "--report", str(rep)]) == 0
    res = json.loads(rep.read_text())["results"]
    for key in ("complementarity_residual", "constraint_violation", "psor_sweeps_max",
                "decrease_rate", "largest_down_step", "t_min"):
        assert key in res
    b = np.array([float(r[1]) for r in rows(out)[1:]])
    assert np.max(np.abs(b[-500:])) < 0.05


def test_mc(files):
    d, spec, _, b = files
    out = d / "e.csv"
    assert main(["mc", "--spec", str(spec), "--boundary", str(b), "--paths", "5000", "--dt",
                 "0.01", "--seed", "1", "--bridge", "--out", str(out)]) == 0
    data = rows(out)
    assert data[0][:3] == ["t", "p_hat", "ci99"] and len(data) == 102


def test_roundtrip_bp(files):
    d, spec, cfg, b = files
    rep = d / "r.json"
    assert main(["roundtrip-bp", "--spec", str(spec), "--boundary", str(b), "--config", str(cfg),
                 "--report", str(rep)]) == 0
    assert json.loads(rep.read_text())["results"]["sup_gap"] <= 0.05
    assert main(["roundtrip-bp", "--spec", str(spec), "--boundary", str(b), "--config", str(cfg),
                 "--tolerance", "1e-12"]) == 2
    never = d / "never.csv"
    never.write_text("t,b\n0,-inf\n1,-inf\n")
    assert main(["roundtrip-bp", "--spec", str(spec), "--boundary", str(never), "--config",
                 str(cfg), "--report", str(rep)]) == 0
    assert json.loads(rep.read_text())["results"]["sup_gap"] == 0.0


def test_roundtrip_pb_unit_curve(files):
    d, spec, cfg, _ = files
    one = d / "one.csv"
    one.write_text("t,p\n0,1\n1,1\n")
    rep = d / "r.json"
    assert main(["roundtrip-pb", "--spec", str(spec), "--survival", str(one), "--config", str(cfg),
                 "--report", str(rep), "--out", str(d / "cmp.csv")]) == 0
    res = json.loads(rep.read_text())["results"]
    assert res["sup_gap_mc"] == 0.0 and res["sup_gap_direct"] <= 1e-10


def test_errors_exit_one(files, capsys):
    d, spec, cfg, b = files
    assert main(["inverse", "--spec", str(spec), "--survival", str(d / "missing.csv"),
                 "--out", str(d / "x.csv")]) == 1
    bad = d / "bad.json"
    bad.write_text(json.dumps({"omega": 1.2}))
    assert main(["direct", "--spec", str(spec), "--boundary", str(b), "--config", str(bad),
                 "--out", str(d / "p.csv")]) == 1
    assert "unknown config keys" in capsys.readouterr().err


def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "ifpp", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "roundtrip-pb" in out.stdout
